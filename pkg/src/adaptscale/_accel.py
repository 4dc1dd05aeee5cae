"""Numba switch.

Set ``ADAPTSCALE_DISABLE_NUMBA=1`` to force the pure-numpy kernels. When numba
is not importable the numpy path is used regardless.
"""
import os

_FLAG = "ADAPTSCALE_DISABLE_NUMBA"

try:
    from numba import njit as _numba_njit
    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba_njit = None
    HAS_NUMBA = False


def _flag_set() -> bool:
    return os.environ.get(_FLAG, "").strip().lower() in ("1", "true", "yes", "on")


USE_NUMBA = HAS_NUMBA and not _flag_set()


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise.

    Kernels decorated here are always defined; whether callers dispatch to them
    is decided by ``USE_NUMBA``.
    """
    if HAS_NUMBA:
        return _numba_njit(*args, **kwargs)

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def wrap(fn):
        return fn
    return wrap
