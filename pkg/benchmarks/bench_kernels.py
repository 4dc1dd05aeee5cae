"""Time the numba kernels against their numpy fallbacks, plus one end-to-end run.

    python3 benchmarks/bench_kernels.py [--repeat N]

The end-to-end timing uses whichever path ``ADAPTSCALE_DISABLE_NUMBA`` selects;
run the script twice (with and without the flag) to compare full runs.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from adaptscale import _accel, kernels
from adaptscale.config import ExperimentConfig
from adaptscale.engine import run
from adaptscale.trace import generate


def _best(fn, repeat: int, number: int) -> float:
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def bench(repeat: int) -> list[tuple[str, float, float]]:
    rows = []

    args = (4321.0, 12, 100.0, 1, 50, 100.0, 1.0, 1.0, 44)
    kernels.candidate_sweep_numba(*args)  # compile
    rows.append(("candidate_sweep (n_max=50)",
                 _best(lambda: kernels.candidate_sweep_numba(*args), repeat, 2000),
                 _best(lambda: kernels.candidate_sweep_numpy(*args), repeat, 2000)))

    ranks2 = np.arange(2, 2 * 16 + 1, 2, dtype=np.int64)
    kernels.signed_rank_null_counts_numba(ranks2)
    rows.append(("signed_rank_null_counts (m=16)",
                 _best(lambda: kernels.signed_rank_null_counts_numba(ranks2), repeat, 3),
                 _best(lambda: kernels.signed_rank_null_counts_numpy(ranks2), repeat, 3)))

    u = np.random.default_rng(0).random(500)
    cdf = kernels.poisson_cdf_table(100.0)
    kernels.poisson_invert_numba(u, cdf)
    rows.append(("poisson_invert (500 draws)",
                 _best(lambda: kernels.poisson_invert_numba(u, cdf), repeat, 200),
                 _best(lambda: kernels.poisson_invert_numpy(u, cdf), repeat, 200)))
    return rows


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(f"numba available: {_accel.HAS_NUMBA}; dispatch uses numba: {_accel.USE_NUMBA}")
    print(f"{'kernel':34s} {'numba':>12s} {'numpy':>12s} {'speedup':>8s}")
    for name, t_nb, t_np in bench(args.repeat):
        print(f"{name:34s} {t_nb * 1e6:10.1f}us {t_np * 1e6:10.1f}us {t_np / t_nb:7.1f}x")

    cfg = ExperimentConfig().sim_config()
    trace = generate("flash_crowd", 42)
    run(trace, "mpc", "ar_ls", cfg, 42)  # warm caches
    t = _best(lambda: run(trace, "mpc", "ar_ls", cfg, 42), args.repeat, 1)
    print(f"end-to-end mpc+ar_ls run (500 steps, active path): {t * 1e3:.1f} ms")


if __name__ == "__main__":
    main()
