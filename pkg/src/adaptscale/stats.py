"""Run metrics, t-based confidence intervals and the exact Wilcoxon signed-rank test."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import stats as _sps

from .errors import ProtocolError
from .kernels import signed_rank_null_counts

EXACT_MAX_PAIRS = 25
CI_METHOD = "student-t, two-sided 95%"
POWER_CAVEAT = ("with n = 5 pairs the smallest attainable two-sided exact p-value is "
                "2/32 = 0.0625, so no comparison can reach p < 0.05")


@dataclass(frozen=True)
class RunMetrics:
    policy: str
    workload: str
    seed: int
    sla_violation_rate: float
    total_cost_replica_minutes: float
    avg_replicas: float
    avg_latency_ms: float
    test_steps: int
    violated_steps: int


@dataclass(frozen=True)
class PairedTestResult:
    statistic_w: float
    p_value: float
    n_pairs: int
    n_nonzero: int
    significant_at_005: bool
    degenerate: bool = False
    method: str = "exact"


def summarize_run(records: Sequence, policy: str = "", workload: str = "", seed: int = 0,
                  start_step: int | None = None, end_step: int | None = None) -> RunMetrics:
    """Aggregate step records whose ``step`` lies in ``[start_step, end_step)``.

    With no bounds every record counts (the engine only emits test-split steps).
    """
    rows = [r for r in records
            if (start_step is None or r.step >= start_step) and (end_step is None or r.step < end_step)]
    if not rows:
        raise ProtocolError("no records in the test split")
    violated = sum(1 for r in rows if r.sla_violated)
    n = len(rows)
    return RunMetrics(
        policy=policy, workload=workload, seed=int(seed),
        sla_violation_rate=violated / n,
        total_cost_replica_minutes=math.fsum(r.cost_units for r in rows),
        avg_replicas=math.fsum(r.active_replicas + r.warming_replicas for r in rows) / n,
        avg_latency_ms=math.fsum(r.latency_ms for r in rows) / n,
        test_steps=n, violated_steps=violated)


def mean_ci95(values: Iterable[float]) -> tuple[float, float | None]:
    """Mean and t-based 95% half-width; the half-width is None for fewer than two values."""
    x = np.asarray(list(values), dtype=np.float64)
    if x.size == 0:
        raise ValueError("mean_ci95 needs at least one value")
    mean = float(np.mean(x))
    if x.size < 2:
        return mean, None
    s = float(np.std(x, ddof=1))
    crit = float(_sps.t.ppf(0.975, x.size - 1))
    return mean, crit * s / math.sqrt(x.size)


def signed_ranks(d: np.ndarray) -> np.ndarray:
    """Mid-ranks of ``|d|`` (ties share the average rank)."""
    return _sps.rankdata(np.abs(d), method="average")


def wilcoxon_signed_rank(pairs_a: Sequence[float], pairs_b: Sequence[float]) -> PairedTestResult:
    """Two-sided exact Wilcoxon signed-rank test on ``a - b``.

    Zero differences are dropped, tied magnitudes get mid-ranks, and
    ``W = min(W+, W-)``. The p-value is ``P(W_null <= W_obs)`` over all ``2**m``
    equally likely sign assignments of the observed ranks.
    """
    a = np.asarray(pairs_a, dtype=np.float64)
    b = np.asarray(pairs_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired samples must be one-dimensional and of equal length")
    if a.size < 2:
        raise ValueError("need at least two pairs")
    d = a - b
    d = d[d != 0]
    m = int(d.size)
    if m == 0:
        return PairedTestResult(0.0, 1.0, int(a.size), 0, False, degenerate=True)
    if m > EXACT_MAX_PAIRS:
        raise ValueError(f"exact enumeration supports at most {EXACT_MAX_PAIRS} non-zero pairs, got {m}")
    # mid-ranks are multiples of 1/2, so doubled ranks are exact integers
    ranks2 = np.rint(2.0 * signed_ranks(d)).astype(np.int64)
    total2 = int(ranks2.sum())
    w_plus2 = int(ranks2[d > 0].sum())
    w2 = min(w_plus2, total2 - w_plus2)
    counts = signed_rank_null_counts(ranks2)
    s = np.arange(counts.shape[0])
    null_w2 = np.minimum(s, total2 - s)
    p = float(counts[null_w2 <= w2].sum()) / float(1 << m)
    p = min(p, 1.0)
    return PairedTestResult(w2 / 2.0, p, int(a.size), m, p < 0.05)


def min_attainable_p(n_nonzero: int) -> float:
    """Smallest two-sided exact p for ``n_nonzero`` untied pairs (all signs equal)."""
    return min(1.0, 2.0 / (1 << n_nonzero))
