"""Hot inner loops, each in a numba and a pure-numpy flavour.

The public wrappers (``candidate_sweep``, ``signed_rank_null_counts``,
``poisson_invert``) dispatch on ``adaptscale._accel.USE_NUMBA``. Both flavours
are importable directly so tests and the benchmark can compare them.
"""
from __future__ import annotations

import numpy as np

from . import _accel
from ._accel import njit


# ---------------------------------------------------------------- MPC sweep

@njit(cache=True)
def candidate_sweep_numba(rps, n_active, c, n_min, n_max, w_sla, w_cost, w_stab, n_start):
    n_star = n_start
    j_best = np.inf
    best_r = n_min
    for r in range(n_min, n_max + 1):
        u = rps / (r * c)
        over = u - 1.0 if u > 1.0 else 0.0
        j = w_sla * over * over + w_cost * r / n_max + w_stab * abs(r - n_active) / n_max
        if j < j_best:
            j_best = j
            best_r = r
            if r > n_star:
                n_star = r
    return n_star, j_best, best_r


def candidate_sweep_numpy(rps, n_active, c, n_min, n_max, w_sla, w_cost, w_stab, n_start):
    r = np.arange(n_min, n_max + 1, dtype=np.int64)
    u = rps / (r * c)
    over = np.maximum(u - 1.0, 0.0)
    j = w_sla * over * over + w_cost * r / n_max + w_stab * np.abs(r - n_active) / n_max
    # argmin returns the first minimum, i.e. the strict-improvement winner
    i = int(np.argmin(j))
    best_r = n_min + i
    return max(n_start, best_r), float(j[i]), best_r


def candidate_sweep(rps: float, n_active: int, c: float, n_min: int, n_max: int,
                    w_sla: float, w_cost: float, w_stab: float,
                    n_start: int) -> tuple[int, float, int]:
    """Sweep r = n_min..n_max over the step cost and ratchet ``n_start`` upward.

    Returns ``(n_star, j_best, best_r)`` where ``best_r`` is the plain argmin
    (smallest r on ties) and ``n_star = max(n_start, best_r)``.
    """
    fn = candidate_sweep_numba if _accel.USE_NUMBA else candidate_sweep_numpy
    n_star, j_best, best_r = fn(float(rps), int(n_active), float(c), int(n_min), int(n_max),
                                float(w_sla), float(w_cost), float(w_stab), int(n_start))
    return int(n_star), float(j_best), int(best_r)


# ------------------------------------------------- signed-rank null counts

@njit(cache=True)
def signed_rank_null_counts_numba(ranks2):
    """Enumerate all 2**m sign vectors in Gray-code order, tallying W+ (doubled ranks)."""
    m = ranks2.shape[0]
    total = 0
    for i in range(m):
        total += ranks2[i]
    counts = np.zeros(total + 1, dtype=np.int64)
    positive = np.zeros(m, dtype=np.bool_)
    w_plus = 0
    counts[0] += 1
    for g in range(1, 1 << m):
        b = 0
        x = g
        while (x & 1) == 0:
            x >>= 1
            b += 1
        if positive[b]:
            w_plus -= ranks2[b]
        else:
            w_plus += ranks2[b]
        positive[b] = not positive[b]
        counts[w_plus] += 1
    return counts


def signed_rank_null_counts_numpy(ranks2):
    """Same distribution as the numba kernel, built by per-rank convolution."""
    counts = np.ones(1, dtype=np.int64)
    for r in np.asarray(ranks2, dtype=np.int64):
        nxt = np.zeros(counts.shape[0] + int(r), dtype=np.int64)
        nxt[:counts.shape[0]] += counts
        nxt[int(r):] += counts
        counts = nxt
    return counts


def signed_rank_null_counts(ranks2: np.ndarray) -> np.ndarray:
    """``counts[s]`` = number of sign assignments whose doubled W+ equals ``s``."""
    ranks2 = np.ascontiguousarray(ranks2, dtype=np.int64)
    if _accel.USE_NUMBA:
        return signed_rank_null_counts_numba(ranks2)
    return signed_rank_null_counts_numpy(ranks2)


# ------------------------------------------------------ Poisson inversion

def poisson_cdf_table(mean: float) -> np.ndarray:
    if mean <= 0:
        return np.ones(1)
    kmax = int(mean + 12.0 * np.sqrt(mean) + 10)
    k = np.arange(kmax + 1, dtype=np.float64)
    log_pmf = k * np.log(mean) - mean - np.cumsum(np.concatenate(([0.0], np.log(k[1:]))))
    cdf = np.cumsum(np.exp(log_pmf))
    cdf[-1] = 1.0
    return cdf


@njit(cache=True)
def poisson_invert_numba(u, cdf):
    out = np.empty(u.shape[0], dtype=np.int64)
    last = cdf.shape[0] - 1
    for i in range(u.shape[0]):
        k = 0
        while k < last and cdf[k] <= u[i]:
            k += 1
        out[i] = k
    return out


def poisson_invert_numpy(u, cdf):
    return np.minimum(np.searchsorted(cdf, u, side="right"), cdf.shape[0] - 1).astype(np.int64)


def poisson_invert(u: np.ndarray, mean: float) -> np.ndarray:
    """Poisson(mean) variates from uniforms by CDF inversion."""
    cdf = poisson_cdf_table(mean)
    u = np.ascontiguousarray(u, dtype=np.float64)
    if _accel.USE_NUMBA:
        return poisson_invert_numba(u, cdf)
    return poisson_invert_numpy(u, cdf)
