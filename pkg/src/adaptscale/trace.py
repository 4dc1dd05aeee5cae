"""Synthetic RPS workloads.

Six archetypes, each a pure function of ``(archetype, seed, num_steps, params)``.
Randomness comes from keyed SplitMix64 streams (``adaptscale.rng``), so traces are
bit-identical across platforms. Additive noise is ``noise * base * N(0, 1)`` and
every trace is clamped at zero.
"""
from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from . import rng
from .errors import ConfigurationError
from .kernels import poisson_invert

ARCHETYPES = ("smooth", "bursty", "bimodal", "diurnal_burst", "flash_crowd", "slow_ramp")

DEFAULT_PARAMS: dict[str, dict[str, float]] = {
    "smooth": {"base": 100.0, "amplitude": 40.0, "period": 200.0, "noise": 0.03},
    "bursty": {"base": 100.0, "spike_every": 50.0, "spike_jitter": 10.0, "spike_len": 5.0,
               "spike_min": 2.0, "spike_max": 3.0},
    "bimodal": {"low": 80.0, "high": 240.0, "mean_hold": 40.0, "noise": 0.03},
    "diurnal_burst": {"base": 100.0, "period": 480.0, "swing": 0.4, "trough_frac": 0.72,
                      "peak_frac": 0.84, "peak_jitter_frac": 0.02, "peak_len": 30.0,
                      "peak_factor": 2.5, "noise": 0.03},
    "flash_crowd": {"base": 100.0, "spike_factor": 3.0, "spike_len": 20.0,
                    "spike_start_min_frac": 0.82, "spike_start_max_frac": 0.92, "noise": 0.03},
    "slow_ramp": {"base": 50.0, "peak": 400.0, "noise": 0.02},
}

# (low, high) inclusive bounds per parameter name
_RANGES: dict[str, tuple[float, float]] = {
    "base": (0.0, 1e7), "amplitude": (0.0, 1e7), "period": (2.0, 1e7),
    "noise": (0.0, 1.0), "spike_every": (2.0, 1e7), "spike_jitter": (0.0, 1e7),
    "spike_len": (1.0, 1e7), "spike_min": (1.0, 100.0), "spike_max": (1.0, 100.0),
    "low": (0.0, 1e7), "high": (0.0, 1e7), "mean_hold": (1.0, 1e7), "swing": (0.0, 1.0),
    "trough_frac": (0.0, 1.0), "peak_frac": (0.0, 1.0), "peak_jitter_frac": (0.0, 0.5),
    "peak_len": (1.0, 1e7), "peak_factor": (1.0, 100.0), "spike_factor": (1.0, 100.0),
    "spike_start_min_frac": (0.0, 1.0), "spike_start_max_frac": (0.0, 1.0), "peak": (0.0, 1e7),
}

DEFAULT_NUM_STEPS = 500
DEFAULT_STEP_SECONDS = 60.0


@dataclass(frozen=True)
class WorkloadTrace:
    archetype: str
    seed: int
    rps: np.ndarray
    step_seconds: float = DEFAULT_STEP_SECONDS
    params: Mapping[str, float] = field(default_factory=dict)
    # event positions (e.g. spike_start/spike_end) for tests and reports
    markers: Mapping[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return int(self.rps.shape[0])

    def checksum(self) -> str:
        return hashlib.sha256(np.ascontiguousarray(self.rps, dtype="<f8").tobytes()).hexdigest()


@dataclass(frozen=True)
class SplitIndices:
    train_end: int
    val_end: int
    test_end: int


def resolve_params(archetype: str, params: Mapping[str, Any] | None = None) -> dict[str, float]:
    if archetype not in DEFAULT_PARAMS:
        raise ConfigurationError(f"unknown archetype {archetype!r}; expected one of {ARCHETYPES}")
    resolved = dict(DEFAULT_PARAMS[archetype])
    for name, value in (params or {}).items():
        if name not in resolved:
            raise ConfigurationError(f"{archetype}: unknown trace parameter {name!r}")
        value = float(value)
        lo, hi = _RANGES[name]
        if not (lo <= value <= hi) or not math.isfinite(value):
            raise ConfigurationError(f"{archetype}.{name}={value} outside [{lo}, {hi}]")
        resolved[name] = value
    if archetype == "bursty" and resolved["spike_min"] > resolved["spike_max"]:
        raise ConfigurationError("bursty: spike_min must not exceed spike_max")
    if archetype == "flash_crowd" and resolved["spike_start_min_frac"] > resolved["spike_start_max_frac"]:
        raise ConfigurationError("flash_crowd: spike_start_min_frac must not exceed spike_start_max_frac")
    return resolved


def _noise(seed: int, archetype: str, n: int, scale: float) -> np.ndarray:
    if scale == 0.0:
        return np.zeros(n)
    return scale * rng.normals(rng.stream_key(seed, f"{archetype}/noise"), n)


def _smooth(seed, n, p):
    t = np.arange(n, dtype=np.float64)
    rps = p["base"] + p["amplitude"] * np.sin(2.0 * np.pi * t / p["period"])
    return rps + _noise(seed, "smooth", n, p["noise"] * p["base"]), {}


def _bursty(seed, n, p):
    u = rng.uniforms(rng.stream_key(seed, "bursty/poisson"), n)
    rps = poisson_invert(u, p["base"]).astype(np.float64)
    events = rng.Stream(seed, "bursty/spikes")
    every, jitter, length = int(p["spike_every"]), int(p["spike_jitter"]), int(p["spike_len"])
    start = every + events.integer(-jitter, jitter)
    markers = {}
    k = 0
    while start < n:
        factor = events.uniform(p["spike_min"], p["spike_max"])
        rps[start:start + length] *= factor
        markers[f"spike_{k}"] = start
        k += 1
        start += max(length + 1, every + events.integer(-jitter, jitter))
    return rps, markers


def _bimodal(seed, n, p):
    events = rng.Stream(seed, "bimodal/switch")
    levels = (p["low"], p["high"])
    state = events.integer(0, 1)
    rps = np.empty(n)
    i = 0
    prob = 1.0 / p["mean_hold"]
    while i < n:
        hold = events.geometric(prob)
        rps[i:i + hold] = levels[state]
        i += hold
        state = 1 - state
    scale = p["noise"] * 0.5 * (p["low"] + p["high"])
    return rps + _noise(seed, "bimodal", n, scale), {}


def _diurnal_burst(seed, n, p):
    t = np.arange(n, dtype=np.float64)
    trough = p["trough_frac"] * n
    rps = p["base"] * (1.0 - p["swing"] * np.cos(2.0 * np.pi * (t - trough) / p["period"]))
    jitter = int(round(p["peak_jitter_frac"] * n))
    start = int(round(p["peak_frac"] * n)) + rng.Stream(seed, "diurnal_burst/peak").integer(-jitter, jitter)
    start = min(max(start, 0), n - 1)
    end = min(n, start + int(p["peak_len"]))
    rps[start:end] = p["peak_factor"] * p["base"]
    rps = rps + _noise(seed, "diurnal_burst", n, p["noise"] * p["base"])
    return rps, {"peak_start": start, "peak_end": end}


def _flash_crowd(seed, n, p):
    lo = int(round(p["spike_start_min_frac"] * n))
    hi = int(round(p["spike_start_max_frac"] * n))
    start = rng.Stream(seed, "flash_crowd/spike").integer(lo, hi)
    start = min(max(start, 0), n - 1)
    end = min(n, start + int(p["spike_len"]))
    rps = np.full(n, p["base"])
    rps[start:end] = p["spike_factor"] * p["base"]
    rps = rps + _noise(seed, "flash_crowd", n, p["noise"] * p["base"])
    return rps, {"spike_start": start, "spike_end": end}


def _slow_ramp(seed, n, p):
    rps = np.linspace(p["base"], p["peak"], n)
    return rps + _noise(seed, "slow_ramp", n, p["noise"] * p["base"]), {}


_GENERATORS = {
    "smooth": _smooth, "bursty": _bursty, "bimodal": _bimodal,
    "diurnal_burst": _diurnal_burst, "flash_crowd": _flash_crowd, "slow_ramp": _slow_ramp,
}


def generate(archetype: str, seed: int, num_steps: int = DEFAULT_NUM_STEPS,
             params: Mapping[str, Any] | None = None,
             step_seconds: float = DEFAULT_STEP_SECONDS) -> WorkloadTrace:
    """Build one seeded workload trace.

    Raises ``ConfigurationError`` for an unknown archetype, unknown or
    out-of-range parameters, or ``num_steps < 1``.
    """
    resolved = resolve_params(archetype, params)
    if int(num_steps) != num_steps or num_steps < 1:
        raise ConfigurationError(f"num_steps must be a positive integer, got {num_steps!r}")
    if not step_seconds > 0:
        raise ConfigurationError(f"step_seconds must be positive, got {step_seconds!r}")
    if int(seed) != seed or seed < 0:
        raise ConfigurationError(f"seed must be a non-negative integer, got {seed!r}")
    rps, markers = _GENERATORS[archetype](int(seed), int(num_steps), resolved)
    rps = np.maximum(np.asarray(rps, dtype=np.float64), 0.0)
    rps.setflags(write=False)
    return WorkloadTrace(archetype, int(seed), rps, float(step_seconds), resolved, markers)


def split(trace_or_length: WorkloadTrace | int) -> SplitIndices:
    """70/10/20 train/validation/test boundaries; train and validation are floored."""
    n = trace_or_length if isinstance(trace_or_length, int) else len(trace_or_length)
    if n < 10:
        raise ConfigurationError(f"trace length {n} is below the minimum of 10 steps")
    train_end = (7 * n) // 10
    val_end = train_end + n // 10
    return SplitIndices(train_end, val_end, n)


def write_csv(trace: WorkloadTrace, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "rps"])
        for i, v in enumerate(trace.rps):
            w.writerow([i, repr(float(v))])


def read_csv(path: str | Path, archetype: str = "imported", seed: int = 0,
             step_seconds: float = DEFAULT_STEP_SECONDS) -> WorkloadTrace:
    """Load a ``step,rps`` CSV. Steps must be 0..n-1 in order; rps finite and non-negative."""
    values = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["step", "rps"]:
            raise ConfigurationError(f"{path}: expected header 'step,rps', got {header}")
        for expected, row in enumerate(reader):
            if int(row[0]) != expected:
                raise ConfigurationError(f"{path}: step {row[0]} out of order (expected {expected})")
            v = float(row[1])
            if not math.isfinite(v) or v < 0:
                raise ConfigurationError(f"{path}: invalid rps {row[1]!r} at step {expected}")
            values.append(v)
    if not values:
        raise ConfigurationError(f"{path}: no rows")
    rps = np.asarray(values, dtype=np.float64)
    rps.setflags(write=False)
    return WorkloadTrace(archetype, seed, rps, float(step_seconds))
