"""Scaling policies: a reactive HPA-style rule and the forecast-driven MPC rule."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, ProtocolError
from .kernels import candidate_sweep


@dataclass(frozen=True)
class CapacityModel:
    per_replica_rps: float = 100.0
    n_min: int = 1
    n_max: int = 50

    def __post_init__(self):
        if not self.per_replica_rps > 0:
            raise ConfigurationError(f"per_replica_rps must be positive, got {self.per_replica_rps!r}")
        if self.n_min < 1 or self.n_min > self.n_max:
            raise ConfigurationError(f"need 1 <= n_min <= n_max, got [{self.n_min}, {self.n_max}]")

    def clamp(self, n: int) -> int:
        return min(max(int(n), self.n_min), self.n_max)


@dataclass(frozen=True)
class MpcWeights:
    w_sla: float = 100.0
    w_cost: float = 1.0
    w_stab: float = 1.0
    gamma: float = 1.25  # 1 / (1 - base_latency / sla): exact forecasts land at the SLA utilization

    def __post_init__(self):
        if min(self.w_sla, self.w_cost, self.w_stab) < 0:
            raise ConfigurationError("MPC weights must be non-negative")
        if max(self.w_sla, self.w_cost, self.w_stab) <= 0:
            raise ConfigurationError("at least one MPC weight must be positive")
        if not self.gamma >= 1.0:
            raise ConfigurationError(f"forecast margin gamma must be >= 1, got {self.gamma!r}")


@dataclass(frozen=True)
class PolicyDecision:
    target_replicas: int
    reactive_floor: int
    proactive_target: int
    best_candidate_cost: float
    horizon_used: int


def _ceil_div(rps: float, c: float) -> int:
    return math.ceil(rps / c)


def hpa_decide(current_rps: float, active_replicas: int, capacity: CapacityModel,
               target_utilization: float = 0.7, tolerance: float = 0.1) -> PolicyDecision:
    """Proportional rule ``ceil(n * u / target)`` with a dead-band around the target."""
    if active_replicas < 1:
        raise ValueError("active_replicas must be >= 1")
    if current_rps < 0:
        raise ValueError("current_rps must be >= 0")
    u = current_rps / (active_replicas * capacity.per_replica_rps)
    ratio = u / target_utilization
    if abs(ratio - 1.0) <= tolerance:
        desired = active_replicas
    else:
        # n * u / target == rps / (c * target); the guard absorbs round-off above an integer
        desired = math.ceil(current_rps / (capacity.per_replica_rps * target_utilization) - 1e-9)
    desired = capacity.clamp(desired)
    reactive = capacity.clamp(max(1, _ceil_div(current_rps, capacity.per_replica_rps)))
    return PolicyDecision(desired, reactive, desired, float("nan"), 1)


def mpc_decide(current_rps: float, active_replicas: int, forecast: Sequence[float], horizon: int,
               capacity: CapacityModel, weights: MpcWeights = MpcWeights()) -> PolicyDecision:
    """One MPC step.

    The reactive floor and the proactive target (peak forecast over the next
    ``horizon`` steps, inflated by ``gamma``) seed the target; the candidate
    sweep can only raise it. Forecast entries beyond ``horizon`` are never read.
    """
    if active_replicas < 1:
        raise ValueError("active_replicas must be >= 1")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if len(forecast) < horizon:
        raise ProtocolError(f"forecast has {len(forecast)} values, horizon needs {horizon}")
    c = capacity.per_replica_rps
    n_reactive = max(1, _ceil_div(current_rps, c))
    peak = float(np.max(np.asarray(forecast[:horizon], dtype=np.float64)))
    n_pro = max(1, _ceil_div(weights.gamma * peak, c))
    n_star, j_best, _ = candidate_sweep(current_rps, active_replicas, c, capacity.n_min, capacity.n_max,
                                        weights.w_sla, weights.w_cost, weights.w_stab,
                                        max(n_reactive, n_pro))
    return PolicyDecision(capacity.clamp(n_star), n_reactive, n_pro, j_best, int(horizon))


def sweep_argmin(current_rps: float, active_replicas: int, capacity: CapacityModel,
                 weights: MpcWeights = MpcWeights()) -> int:
    """The unfloored candidate-sweep winner (smallest r on ties)."""
    _, _, best = candidate_sweep(current_rps, active_replicas, capacity.per_replica_rps,
                                 capacity.n_min, capacity.n_max,
                                 weights.w_sla, weights.w_cost, weights.w_stab, capacity.n_min)
    return best


def objective_step_cost(violation_fraction: float, replicas: int, prev_replicas: int, n_max: int,
                        weights: MpcWeights | tuple[float, float, float] = MpcWeights()) -> float:
    """Linear SLA + normalized cost + unnormalized churn; a per-run diagnostic only.

    ``weights`` may be an ``MpcWeights`` or a plain ``(w_sla, w_cost, w_stab)`` tuple.
    """
    if not 0.0 <= violation_fraction <= 1.0:
        raise ValueError(f"violation_fraction must be in [0, 1], got {violation_fraction!r}")
    if isinstance(weights, tuple):
        w_sla, w_cost, w_stab = weights
    else:
        w_sla, w_cost, w_stab = weights.w_sla, weights.w_cost, weights.w_stab
    return w_sla * violation_fraction + w_cost * replicas / n_max + w_stab * abs(replicas - prev_replicas)
