"""Command-line entry point: ``adaptscale <command> [options]``.

Exit status is 0 only when every cell of the requested suite completed.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

import yaml

from . import experiments
from .config import ExperimentConfig, config_from_mapping, load_config
from .errors import ConfigurationError

log = logging.getLogger("adaptscale")

EXIT_OK, EXIT_CELL_FAILED, EXIT_CONFIG = 0, 1, 2


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _str_list(text: str) -> tuple[str, ...]:
    return tuple(s.strip() for s in text.split(",") if s.strip())


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML configuration file")
    common.add_argument("--out", type=Path, help="output directory (overrides output_dir)")
    common.add_argument("--seeds", type=_int_list, help="comma-separated seeds, e.g. 42,123")
    common.add_argument("--archetypes", type=_str_list, help="comma-separated workload archetypes")
    common.add_argument("--jitter", type=float, help="cold-start jitter fraction; 0 disables jitter")
    common.add_argument("--cold-start", type=float, dest="cold_start", help="nominal cold start, seconds")
    common.add_argument("--workers", type=int, help="parallel worker processes")
    common.add_argument("--steps", type=int, help="trace length in steps")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="adaptscale", description="Autoscaling policy experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run-matrix", parents=[common], help="policy x workload x seed matrix")
    sub.add_parser("sweep", parents=[common], help="cold-start sensitivity sweep")
    sub.add_parser("abtest", parents=[common], help="adaptive vs fixed horizon paired test")
    sub.add_parser("gen-traces", parents=[common], help="write workload traces as CSV")
    sub.add_parser("print-config", parents=[common], help="print the fully resolved configuration")
    rep = sub.add_parser("report", help="re-render report.md from a summary.json")
    rep.add_argument("summary", type=Path)
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """File values first, then command-line overrides."""
    cfg = load_config(args.config)
    raw = cfg.to_dict()
    if args.seeds is not None:
        raw["seeds"] = list(args.seeds)
    if args.archetypes is not None:
        raw["archetypes"] = list(args.archetypes)
    if args.workers is not None:
        raw["workers"] = args.workers
    if args.steps is not None:
        raw["num_steps"] = args.steps
    if args.out is not None:
        raw["output_dir"] = str(args.out)
    if args.jitter is not None:
        raw["cold_start"]["jitter_fraction"] = args.jitter
        raw["cold_start"]["enabled_jitter"] = args.jitter > 0
    if args.cold_start is not None:
        raw["cold_start"]["nominal_seconds"] = args.cold_start
    # trace_params is fully materialized by to_dict; keep only explicit overrides
    raw["trace_params"] = {k: dict(v) for k, v in cfg.trace_params.items()}
    return config_from_mapping(raw)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "report":
        try:
            results = json.loads(args.summary.read_text())
            text = experiments.emit_report(results)
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(text, end="")
        return EXIT_OK
    try:
        cfg = resolve_config(args)
    except (ConfigurationError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = cfg.output_dir
    try:
        if args.command == "print-config":
            print(_yaml(cfg), end="")
        elif args.command == "gen-traces":
            for p in experiments.gen_traces(cfg, out):
                print(p)
        elif args.command == "run-matrix":
            print(experiments.emit_report(experiments.run_matrix(cfg, out)), end="")
        elif args.command == "sweep":
            print(experiments.emit_report(experiments.run_sensitivity(cfg, out)), end="")
        elif args.command == "abtest":
            print(experiments.emit_report(experiments.run_fhopt_ab(cfg, out)), end="")
    except experiments.CellFailure as exc:
        print(f"error: {exc}; outputs under {out} are incomplete", file=sys.stderr)
        return EXIT_CELL_FAILED
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def _yaml(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


if __name__ == "__main__":
    sys.exit(main())
