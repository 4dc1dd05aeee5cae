"""Online cold-start estimation and planning-horizon derivation.

``ColdStartEstimator`` keeps an EWMA of observed boot durations. Each
observation is clipped to ``[clip_min, clip_max]`` first, and Welford
accumulators track the mean and variance of the clipped values.
``derive_horizon`` converts the estimate into a lookahead in steps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigurationError, MeasurementError

DEFAULT_ALPHA = 0.3
DEFAULT_PRIOR_SECONDS = 120.0
DEFAULT_CLIP_MIN_SECONDS = 5.0
DEFAULT_CLIP_MAX_SECONDS = 600.0
DEFAULT_BUFFER_STEPS = 1


@dataclass(frozen=True)
class EstimatorSummary:
    estimate_seconds: float
    count: int
    mean_seconds: float
    variance: float | None  # None until two observations exist
    clip_min_seconds: float
    clip_max_seconds: float
    alpha: float
    steps_since_last_observation: int | None
    rejected: int


class ColdStartEstimator:
    def __init__(self, alpha: float = DEFAULT_ALPHA, prior_seconds: float = DEFAULT_PRIOR_SECONDS,
                 clip_min_seconds: float = DEFAULT_CLIP_MIN_SECONDS,
                 clip_max_seconds: float = DEFAULT_CLIP_MAX_SECONDS):
        if not 0.0 < alpha < 1.0:
            raise ConfigurationError(f"alpha must lie in (0, 1), got {alpha!r}")
        if not 0.0 < clip_min_seconds < clip_max_seconds:
            raise ConfigurationError(
                f"need 0 < clip_min < clip_max, got [{clip_min_seconds}, {clip_max_seconds}]")
        if not clip_min_seconds <= prior_seconds <= clip_max_seconds:
            raise ConfigurationError(
                f"prior {prior_seconds}s outside clip bounds [{clip_min_seconds}, {clip_max_seconds}]")
        self.alpha = float(alpha)
        self.prior_seconds = float(prior_seconds)
        self.clip_min_seconds = float(clip_min_seconds)
        self.clip_max_seconds = float(clip_max_seconds)
        self.estimate_seconds = float(prior_seconds)
        self.welford_count = 0
        self.welford_mean = 0.0
        self.welford_m2 = 0.0
        self.rejected = 0
        self._last_step: int | None = None
        self._current_step: int | None = None

    def observe_graduation(self, observed_seconds: float, step: int | None = None) -> float:
        """Fold one measured cold start into the estimate and return the new estimate.

        Non-finite or non-positive values raise ``MeasurementError`` and leave the
        estimate untouched (they are counted in ``rejected``).
        """
        obs = float(observed_seconds)
        if not math.isfinite(obs) or obs <= 0.0:
            self.rejected += 1
            raise MeasurementError(f"cold-start observation must be finite and > 0, got {observed_seconds!r}")
        obs = min(max(obs, self.clip_min_seconds), self.clip_max_seconds)
        self.estimate_seconds = self.alpha * obs + (1.0 - self.alpha) * self.estimate_seconds
        self.welford_count += 1
        delta = obs - self.welford_mean
        self.welford_mean += delta / self.welford_count
        self.welford_m2 += delta * (obs - self.welford_mean)
        if step is not None:
            self._last_step = step
            self.tick(step)
        return self.estimate_seconds

    def tick(self, step: int) -> None:
        """Record the current simulation step (for the staleness diagnostic)."""
        self._current_step = step

    def variance(self) -> float | None:
        if self.welford_count < 2:
            return None
        return self.welford_m2 / (self.welford_count - 1)

    def summary(self) -> EstimatorSummary:
        stale = None
        if self._last_step is not None and self._current_step is not None:
            stale = self._current_step - self._last_step
        return EstimatorSummary(
            estimate_seconds=self.estimate_seconds,
            count=self.welford_count,
            mean_seconds=self.welford_mean,
            variance=self.variance(),
            clip_min_seconds=self.clip_min_seconds,
            clip_max_seconds=self.clip_max_seconds,
            alpha=self.alpha,
            steps_since_last_observation=stale,
            rejected=self.rejected,
        )


@dataclass(frozen=True)
class HorizonParams:
    step_seconds: float = 60.0
    buffer_steps: int = DEFAULT_BUFFER_STEPS

    def __post_init__(self):
        if not self.step_seconds > 0:
            raise ConfigurationError(f"step_seconds must be positive, got {self.step_seconds!r}")
        if int(self.buffer_steps) != self.buffer_steps or self.buffer_steps < 0:
            raise ConfigurationError(f"buffer_steps must be a non-negative integer, got {self.buffer_steps!r}")


def derive_horizon(estimate_seconds: float, params: HorizonParams = HorizonParams()) -> int:
    """Lookahead ``max(1, ceil(estimate / step) + buffer)`` in steps."""
    if not estimate_seconds > 0:
        raise ValueError(f"estimate must be positive, got {estimate_seconds!r}")
    return max(1, math.ceil(estimate_seconds / params.step_seconds) + int(params.buffer_steps))


def horizon_slack(fixed_horizon: int, realized_horizon_steps: int) -> int:
    """``fixed - realized``: negative means capacity lands late, positive early."""
    if fixed_horizon < 1 or realized_horizon_steps < 1:
        raise ValueError("horizons must be >= 1")
    return int(fixed_horizon) - int(realized_horizon_steps)
