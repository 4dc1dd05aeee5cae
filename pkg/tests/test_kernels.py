import itertools
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adaptscale import kernels


def brute_counts(ranks2):
    counts = np.zeros(sum(ranks2) + 1, dtype=np.int64)
    for signs in itertools.product((0, 1), repeat=len(ranks2)):
        counts[sum(r for r, s in zip(ranks2, signs) if s)] += 1
    return counts


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(1, 30), min_size=1, max_size=10))
def test_null_counts_both_flavours_match_bruteforce(ranks2):
    arr = np.array(ranks2, dtype=np.int64)
    expected = brute_counts(ranks2)
    assert np.array_equal(kernels.signed_rank_null_counts_numba(arr), expected)
    assert np.array_equal(kernels.signed_rank_null_counts_numpy(arr), expected)


@settings(max_examples=300, deadline=None)
@given(st.floats(0, 1e4), st.integers(1, 50), st.integers(1, 50), st.floats(0, 200),
       st.floats(0, 5), st.floats(0, 5))
def test_candidate_sweep_flavours_agree(rps, n_a, n_start, w_sla, w_cost, w_stab):
    args = (rps, n_a, 100.0, 1, 50, w_sla, w_cost, w_stab, n_start)
    a = kernels.candidate_sweep_numba(*args)
    b = kernels.candidate_sweep_numpy(*args)
    assert a[0] == b[0] and a[2] == b[2]
    assert a[1] == pytest.approx(b[1], rel=1e-12, abs=1e-15)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.1, 500), st.lists(st.floats(0, 1, exclude_max=True), min_size=1, max_size=100))
def test_poisson_invert_flavours_agree(mean, u):
    cdf = kernels.poisson_cdf_table(mean)
    u = np.array(u)
    assert np.array_equal(kernels.poisson_invert_numba(u, cdf), kernels.poisson_invert_numpy(u, cdf))


def test_poisson_moments():
    u = np.random.default_rng(0).random(200_000)
    x = kernels.poisson_invert(u, 100.0)
    assert x.mean() == pytest.approx(100, rel=0.01)
    assert x.var() == pytest.approx(100, rel=0.03)


def test_dispatch_uses_selected_path(kernel_path):
    n_star, j, best = kernels.candidate_sweep(250.0, 1, 100.0, 1, 50, 100.0, 1.0, 1.0, 3)
    assert n_star >= 3 and best >= 1
    counts = kernels.signed_rank_null_counts(np.array([2, 4, 6]))
    assert counts.sum() == 8


def test_env_flag_disables_numba():
    code = "from adaptscale import _accel; print(_accel.USE_NUMBA)"
    out = subprocess.run([sys.executable, "-c", code], env={"ADAPTSCALE_DISABLE_NUMBA": "1", "PATH": ""},
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "False"
