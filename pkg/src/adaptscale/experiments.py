"""Experiment suites and their file outputs.

Layout under the output directory::

    <suite>/<cell>/steps.csv      per-step log (STEP_CSV_HEADER)
    <suite>/<cell>/adapt.csv      step,estimate,variance
    <suite>/summary.csv           one row per cell plus aggregate rows
    <suite>/summary.json          resolved config, cells, aggregates
    <suite>/report.md             rendered tables

A cell is named ``<policy>_<workload>_<seed>``; the sweep nests cells under
``cs<seconds>/`` and the A/B test under ``<arm>/``.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import os
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence

from . import engine
from .config import ExperimentConfig
from .errors import ConfigurationError
from .stats import CI_METHOD, POWER_CAVEAT, mean_ci95, summarize_run, wilcoxon_signed_rank
from .trace import ARCHETYPES, generate, write_csv

log = logging.getLogger(__name__)

METRICS = ("sla_violation_rate", "total_cost_replica_minutes", "avg_replicas", "avg_latency_ms")
MPC_TARGET_NOTE = ("MPC violation target relaxed to < 10% (from < 5%) because the forecasters "
                   "available here are lightweight (exponential smoothing and least-squares AR).")


class CellFailure(RuntimeError):
    def __init__(self, cell: str, cause: BaseException):
        super().__init__(f"cell {cell} failed: {cause!r}")
        self.cell = cell
        self.cause = cause


def policy_label(policy: str, forecaster: str | None) -> str:
    return policy if forecaster is None else f"{policy}-{forecaster}"


@dataclass(frozen=True)
class Cell:
    suite: str
    group: str  # "" or a sub-directory (sweep level, A/B arm)
    policy: str
    forecaster: str | None
    workload: str
    seed: int
    nominal_seconds: float | None = None
    horizon_mode: str = "fhopt"

    @property
    def label(self) -> str:
        return policy_label(self.policy, self.forecaster)

    @property
    def name(self) -> str:
        return f"{self.label}_{self.workload}_{self.seed}"

    @property
    def key(self) -> tuple:
        return (self.group, self.label, self.workload, self.seed)


def _fmt(x: Any) -> Any:
    if isinstance(x, float):
        return repr(x)
    return "" if x is None else x


def _write_steps(path: Path, result: engine.RunResult) -> None:
    with open(path / "steps.csv", "w", newline="") as fh:
        fh.write(engine.STEP_CSV_HEADER + "\n")
        w = csv.writer(fh, lineterminator="\n")
        for r in result.records:
            w.writerow(engine.record_csv_row(r))
    with open(path / "adapt.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "estimate", "variance"])
        for r in result.records:
            w.writerow([r.step, repr(r.adapt_estimate_seconds), _fmt(r.adapt_variance)])


def execute_cell(cfg: ExperimentConfig, cell: Cell, out_dir: Path | None) -> dict[str, Any]:
    """Run one cell, write its step logs, and return its summary row."""
    trace = generate(cell.workload, cell.seed, cfg.num_steps, cfg.trace_params.get(cell.workload),
                     cfg.step_seconds)
    sim_cfg = cfg.sim_config(nominal_seconds=cell.nominal_seconds, horizon_mode=cell.horizon_mode)
    result = engine.run(trace, cell.policy, cell.forecaster, sim_cfg, cell.seed)
    metrics = summarize_run(result.records, cell.label, cell.workload, cell.seed)
    if out_dir is not None:
        cell_dir = out_dir / cell.group / cell.name if cell.group else out_dir / cell.name
        cell_dir.mkdir(parents=True, exist_ok=True)
        _write_steps(cell_dir, result)
    row = {"group": cell.group, "policy": cell.label, "workload": cell.workload, "seed": cell.seed,
           "nominal_seconds": sim_cfg.cold_start.nominal_seconds, "horizon_mode": cell.horizon_mode}
    row.update({k: getattr(metrics, k) for k in METRICS})
    row.update(test_steps=metrics.test_steps, violated_steps=metrics.violated_steps,
               objective_total=result.objective_total,
               mean_horizon_slack=engine.mean_horizon_slack(result),
               adapt_final_estimate=result.estimator_summary.estimate_seconds,
               adapt_observations=result.estimator_summary.count,
               trace_sha256=trace.checksum(), **{f"n_{k}": v for k, v in result.counters.items()})
    return row


def _run_cell_task(args):
    cfg, cell, out_dir = args
    try:
        return cell, execute_cell(cfg, cell, out_dir), None
    except Exception as exc:  # reported with the cell identity by the caller
        return cell, None, exc


def execute_cells(cfg: ExperimentConfig, cells: Sequence[Cell], out_dir: Path | None) -> list[dict]:
    """Run cells (in a process pool when ``cfg.workers > 1``); rows sorted by cell key."""
    tasks = [(cfg, c, out_dir) for c in cells]
    if cfg.workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            outcomes = list(pool.map(_run_cell_task, tasks))
    else:
        outcomes = [_run_cell_task(t) for t in tasks]
    rows = []
    for cell, row, exc in sorted(outcomes, key=lambda o: o[0].key):
        if exc is not None:
            raise CellFailure(f"{cell.suite}/{cell.group + '/' if cell.group else ''}{cell.name}", exc)
        rows.append(row)
    return rows


def aggregate(rows: Iterable[dict], keys: Sequence[str] = ("group", "policy", "workload")) -> list[dict]:
    groups: dict[tuple, list[dict]] = defaultdict(list)
    for r in rows:
        groups[tuple(r[k] for k in keys)].append(r)
    out = []
    for gkey in sorted(groups):
        members = groups[gkey]
        agg = dict(zip(keys, gkey))
        agg["n_seeds"] = len(members)
        for m in METRICS:
            mean, half = mean_ci95([r[m] for r in members])
            agg[m] = mean
            agg[f"{m}_ci95"] = half
        out.append(agg)
    return out


SUMMARY_COLUMNS = ("row_type", "group", "policy", "workload", "seed", "nominal_seconds", "horizon_mode",
                   "n_seeds") + tuple(c for m in METRICS for c in (m, f"{m}_ci95")) + (
                   "test_steps", "violated_steps", "objective_total", "mean_horizon_slack",
                   "adapt_final_estimate", "adapt_observations", "trace_sha256")


def write_summary_csv(path: Path, rows: Sequence[dict], aggregates: Sequence[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for r in rows:
            w.writerow([_fmt({**r, "row_type": "cell"}.get(c)) for c in SUMMARY_COLUMNS])
        for a in aggregates:
            w.writerow([_fmt({**a, "row_type": "aggregate"}.get(c)) for c in SUMMARY_COLUMNS])


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, allow_nan=False, default=_json_default)
        fh.write("\n")


def _json_default(o):
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _clean(value):
    """Replace non-finite floats with None so the JSON stays strict."""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_clean(v) for v in value]
    return value


def _suite_dir(cfg: ExperimentConfig, suite: str, out: str | os.PathLike | None) -> Path:
    root = Path(out if out is not None else cfg.output_dir)
    path = root / suite
    path.mkdir(parents=True, exist_ok=True)
    return path


def _run_suite(cfg: ExperimentConfig, suite: str, cells: Sequence[Cell], out: Path,
               agg_keys: Sequence[str]) -> tuple[list[dict], list[dict]]:
    try:
        rows = execute_cells(cfg, cells, out)
    except CellFailure as exc:
        _write_json(out / "summary.json", {"suite": suite, "complete": False, "failed_cell": exc.cell,
                                           "error": repr(exc.cause), "config": cfg.to_dict()})
        raise
    aggs = aggregate(rows, agg_keys)
    write_summary_csv(out / "summary.csv", rows, aggs)
    return rows, aggs


# ------------------------------------------------------------------ suites

def matrix_cells(cfg: ExperimentConfig) -> list[Cell]:
    return [Cell("matrix", "", p, f, a, s) for p, f in cfg.policies for a in cfg.archetypes for s in cfg.seeds]


def run_matrix(cfg: ExperimentConfig, out: str | os.PathLike | None = None) -> dict[str, Any]:
    """Every (policy, workload, seed) cell; per-cell metrics plus mean and 95% CI per (policy, workload)."""
    cfg.validate()
    out_dir = _suite_dir(cfg, "matrix", out)
    rows, aggs = _run_suite(cfg, "matrix", matrix_cells(cfg), out_dir, ("group", "policy", "workload"))
    results = {"suite": "matrix", "complete": True, "ci_method": CI_METHOD, "config": cfg.to_dict(),
               "cells": rows, "aggregates": aggs, "note": MPC_TARGET_NOTE}
    results = _clean(results)
    _write_json(out_dir / "summary.json", results)
    (out_dir / "report.md").write_text(emit_report(results))
    return results


def run_sensitivity(cfg: ExperimentConfig, out: str | os.PathLike | None = None) -> dict[str, Any]:
    """Sweep the nominal cold start over the configured levels, all else fixed."""
    cfg.validate()
    archetypes = tuple(cfg.sweep.archetypes or cfg.archetypes)
    cells = [Cell("sweep", f"cs{int(level) if float(level).is_integer() else level}", p, f, a, s,
                  nominal_seconds=float(level))
             for level in cfg.sweep.levels for p, f in cfg.policies for a in archetypes for s in cfg.seeds]
    out_dir = _suite_dir(cfg, "sweep", out)
    rows, aggs = _run_suite(cfg, "sweep", cells, out_dir, ("group", "policy", "workload"))
    grid = sensitivity_grid(rows)
    with open(out_dir / "grid.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["nominal_seconds", "policy", "workload", "n", "sla_violation_rate",
                    "sla_violation_rate_ci95"])
        for g in grid:
            w.writerow([_fmt(g[k]) for k in ("nominal_seconds", "policy", "workload", "n",
                                             "sla_violation_rate", "sla_violation_rate_ci95")])
    results = _clean({"suite": "sweep", "complete": True, "ci_method": CI_METHOD, "config": cfg.to_dict(),
                      "levels": [float(x) for x in cfg.sweep.levels], "archetypes": list(archetypes),
                      "cells": rows, "aggregates": aggs, "grid": grid})
    _write_json(out_dir / "summary.json", results)
    (out_dir / "report.md").write_text(emit_report(results))
    return results


def sensitivity_grid(rows: Sequence[dict]) -> list[dict]:
    """Level x policy violation rates, per workload and pooled over workloads ("all")."""
    buckets: dict[tuple, list[float]] = defaultdict(list)
    for r in rows:
        buckets[(r["nominal_seconds"], r["policy"], r["workload"])].append(r["sla_violation_rate"])
        buckets[(r["nominal_seconds"], r["policy"], "all")].append(r["sla_violation_rate"])
    grid = []
    for (level, policy, workload) in sorted(buckets):
        vals = buckets[(level, policy, workload)]
        mean, half = mean_ci95(vals)
        grid.append({"nominal_seconds": level, "policy": policy, "workload": workload, "n": len(vals),
                     "sla_violation_rate": mean, "sla_violation_rate_ci95": half})
    return grid


def run_fhopt_ab(cfg: ExperimentConfig, out: str | os.PathLike | None = None) -> dict[str, Any]:
    """Paired runs with the adaptive horizon vs. a fixed horizon; exact signed-rank test per workload."""
    cfg.validate()
    ab = cfg.abtest
    cells = [Cell("abtest", arm, "mpc", ab.forecaster, a, s, horizon_mode=arm)
             for arm in ("fhopt", "fixed") for a in ab.archetypes for s in cfg.seeds]
    out_dir = _suite_dir(cfg, "abtest", out)
    rows, aggs = _run_suite(cfg, "abtest", cells, out_dir, ("group", "policy", "workload"))
    by_key = {(r["group"], r["workload"], r["seed"]): r for r in rows}
    pairs = []
    for a in ab.archetypes:
        for s in cfg.seeds:
            on, off = by_key[("fhopt", a, s)], by_key[("fixed", a, s)]
            if on["trace_sha256"] != off["trace_sha256"]:
                raise RuntimeError(f"A/B pair {a}/{s} consumed different traces")
            pairs.append({"workload": a, "seed": s, "fhopt": on["sla_violation_rate"],
                          "fixed": off["sla_violation_rate"], "trace_sha256": on["trace_sha256"],
                          "fhopt_mean_horizon_slack": on["mean_horizon_slack"],
                          "fixed_mean_horizon_slack": off["mean_horizon_slack"]})
    tests = []
    for label, members in [(a, [p for p in pairs if p["workload"] == a]) for a in ab.archetypes] + [
            ("pooled", pairs)]:
        if len(members) < 2:
            continue
        res = wilcoxon_signed_rank([p["fhopt"] for p in members], [p["fixed"] for p in members])
        tests.append({"workload": label, **asdict(res),
                      "fhopt_better": sum(p["fhopt"] < p["fixed"] for p in members),
                      "fixed_better": sum(p["fhopt"] > p["fixed"] for p in members),
                      "ties": sum(p["fhopt"] == p["fixed"] for p in members)})
    with open(out_dir / "pairs.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        cols = ("workload", "seed", "fhopt", "fixed", "fhopt_mean_horizon_slack",
                "fixed_mean_horizon_slack", "trace_sha256")
        w.writerow(cols)
        for p in pairs:
            w.writerow([_fmt(p[c]) for c in cols])
    results = _clean({"suite": "abtest", "complete": True, "ci_method": CI_METHOD, "config": cfg.to_dict(),
                      "fixed_horizon": ab.fixed_horizon, "cells": rows, "aggregates": aggs,
                      "pairs": pairs, "tests": tests, "power_caveat": POWER_CAVEAT})
    _write_json(out_dir / "summary.json", results)
    (out_dir / "report.md").write_text(emit_report(results))
    return results


def gen_traces(cfg: ExperimentConfig, out: str | os.PathLike | None = None) -> list[Path]:
    out_dir = _suite_dir(cfg, "traces", out)
    paths = []
    for a in cfg.archetypes:
        for s in cfg.seeds:
            trace = generate(a, s, cfg.num_steps, cfg.trace_params.get(a), cfg.step_seconds)
            p = out_dir / f"{a}_{s}.csv"
            write_csv(trace, p)
            paths.append(p)
    return paths


# ------------------------------------------------------------------ report

def _rate_cell(mean: float | None, half: float | None) -> str:
    if mean is None:
        return "n/a"
    if half is None:
        return f"{100 * mean:.1f}% (CI undefined)"
    return f"{100 * mean:.1f}% ± {100 * half:.1f}"


def _num_cell(mean: float | None, half: float | None, digits: int = 1) -> str:
    if mean is None:
        return "n/a"
    if half is None:
        return f"{mean:.{digits}f} (CI undefined)"
    return f"{mean:.{digits}f} ± {half:.{digits}f}"


def _table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(r) + " |" for r in rows]
    return "\n".join(lines)


def _policy_workload_tables(aggs: Sequence[dict], group: str = "") -> str:
    policies = sorted({a["policy"] for a in aggs if a.get("group", "") == group})
    workloads = [w for w in ARCHETYPES if any(a["workload"] == w for a in aggs)]
    workloads += sorted({a["workload"] for a in aggs} - set(workloads))
    index = {(a["policy"], a["workload"]): a for a in aggs if a.get("group", "") == group}
    parts = []
    for metric, title, fmt in (("sla_violation_rate", "SLA violation rate (mean ± 95% CI)", _rate_cell),
                               ("total_cost_replica_minutes", "Total cost, replica-minutes", _num_cell),
                               ("avg_replicas", "Average replicas", _num_cell),
                               ("avg_latency_ms", "Average latency, ms", _num_cell)):
        rows = []
        for p in policies:
            row = [p]
            for w in workloads:
                a = index.get((p, w))
                row.append(fmt(a[metric], a[f"{metric}_ci95"]) if a else "n/a")
            rows.append(row)
        parts.append(f"### {title}\n\n" + _table(["policy"] + workloads, rows))
    return "\n\n".join(parts)


def emit_report(results: dict[str, Any]) -> str:
    """Markdown tables for a suite result (as returned by the runners or read from summary.json)."""
    if not results or not results.get("cells"):
        raise ValueError("empty results: nothing to report")
    suite = results.get("suite", "matrix")
    out = [f"# {suite} results", "", f"Confidence intervals: {results.get('ci_method', CI_METHOD)}.", ""]
    if suite == "matrix":
        out.append(_policy_workload_tables(results["aggregates"]))
        out += ["", results.get("note", MPC_TARGET_NOTE)]
    elif suite == "sweep":
        grid = results.get("grid") or sensitivity_grid(results["cells"])
        levels = sorted({g["nominal_seconds"] for g in grid})
        policies = sorted({g["policy"] for g in grid})
        workloads = ["all"] + [w for w in ARCHETYPES if any(g["workload"] == w for g in grid)]
        index = {(g["nominal_seconds"], g["policy"], g["workload"]): g for g in grid}
        for w in workloads:
            rows = []
            for lv in levels:
                row = [f"{lv:g}s"]
                for p in policies:
                    g = index.get((lv, p, w))
                    row.append(_rate_cell(g["sla_violation_rate"], g["sla_violation_rate_ci95"]) if g else "n/a")
                rows.append(row)
            out += [f"### SLA violation rate vs cold start ({w})", "", _table(["cold start"] + policies, rows), ""]
    elif suite == "abtest":
        rows = [[p["workload"], str(p["seed"]), f"{100 * p['fhopt']:.1f}%", f"{100 * p['fixed']:.1f}%"]
                for p in results["pairs"]]
        out += [f"### Paired SLA violation rates (adaptive vs fixed h = {results.get('fixed_horizon', 2)})", "",
                _table(["workload", "seed", "adaptive", "fixed"], rows), ""]
        trows = [[t["workload"], str(t["n_pairs"]), str(t["n_nonzero"]), f"{t['statistic_w']:g}",
                  f"{t['p_value']:.4f}", "yes" if t["significant_at_005"] else "no",
                  f"{t['fhopt_better']}/{t['fixed_better']}/{t['ties']}"] for t in results["tests"]]
        out += ["### Wilcoxon signed-rank (exact, two-sided)", "",
                _table(["workload", "pairs", "non-zero", "W", "p", "p < 0.05",
                        "adaptive better/worse/tie"], trows), "",
                f"Power caveat: {results.get('power_caveat', POWER_CAVEAT)}."]
    else:
        raise ConfigurationError(f"unknown suite {suite!r}")
    return "\n".join(out).rstrip() + "\n"
