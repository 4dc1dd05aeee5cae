"""Counter-based SplitMix64 random streams.

Every draw is ``mix64(key + (index + 1) * GOLDEN)`` where ``key`` is derived from
the seed and a stream tag. Draws are addressable by index, so two consumers that
share a key see the same value for the same index no matter what else they did
in between. All arithmetic is modulo 2**64 and therefore bit-identical across
platforms.
"""
from __future__ import annotations

import zlib

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_INV_2_53 = 1.0 / (1 << 53)


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a Python int."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def stream_key(seed: int, tag: str) -> int:
    """64-bit key for the stream named ``tag`` under ``seed``."""
    if seed < 0:
        raise ValueError("seed must be a non-negative integer")
    return mix64((seed & MASK64) ^ mix64(zlib.crc32(tag.encode("utf-8"))))


def uniform_at(key: int, index: int) -> float:
    """Uniform double in [0, 1) at position ``index`` of stream ``key``."""
    x = mix64(key + (index + 1) * GOLDEN)
    return (x >> 11) * _INV_2_53


def _mix64_array(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def uniforms(key: int, n: int, offset: int = 0) -> np.ndarray:
    """``n`` consecutive uniforms starting at ``offset``; equals ``uniform_at`` elementwise."""
    idx = np.arange(offset + 1, offset + n + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(key & MASK64) + idx * np.uint64(GOLDEN)
    x = _mix64_array(z)
    return (x >> np.uint64(11)).astype(np.float64) * _INV_2_53


def normals(key: int, n: int) -> np.ndarray:
    """Standard normals by Box-Muller over the uniform stream (two uniforms per value)."""
    u = uniforms(key, 2 * n)
    u1 = 1.0 - u[0::2]  # (0, 1], keeps log finite
    u2 = u[1::2]
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


class Stream:
    """Sequential view over a keyed stream, for code that just wants "the next draw"."""

    def __init__(self, seed: int, tag: str):
        self.key = stream_key(seed, tag)
        self.index = 0

    def uniform(self, low: float = 0.0, high: float = 1.0) -> float:
        u = uniform_at(self.key, self.index)
        self.index += 1
        return low + (high - low) * u

    def integer(self, low: int, high: int) -> int:
        """Integer in ``[low, high]`` inclusive."""
        span = high - low + 1
        return low + min(int(self.uniform() * span), span - 1)

    def geometric(self, p: float) -> int:
        """Number of trials to first success, support {1, 2, ...}."""
        u = 1.0 - self.uniform()
        if p >= 1.0:
            return 1
        return max(1, int(np.ceil(np.log(u) / np.log1p(-p))))
