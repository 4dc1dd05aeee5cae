"""Discrete-time autoscaling simulator.

Each step runs a fixed phase order:

1. read demand ``rps[t]``
2. graduate warming batches with ``ready_step <= t`` (the estimator observes each)
3. compute capacity, utilization, M/M/1 latency, violation and cost
4. feed ``rps[t]`` to the forecaster
5. pick the horizon and ask the policy for a target
6. apply it: scale-down is immediate (newest warming batches are cancelled
   first), scale-up enqueues one batch whose boot time carries seeded jitter

Jitter draws are addressed by (seed, order index), so two runs that differ
only in policy still see the same sequence of boot-time multipliers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import rng
from .errors import AccountingError, ConfigurationError
from .estimator import ColdStartEstimator, HorizonParams, derive_horizon
from .forecast import AutoRegressive, Forecaster, make_forecaster, select_ar_order
from .policy import CapacityModel, MpcWeights, PolicyDecision, hpa_decide, mpc_decide, objective_step_cost
from .trace import WorkloadTrace, split

POLICY_KINDS = ("hpa", "mpc")
HORIZON_MODES = ("fhopt", "fixed")
LATENCY_RESOLUTION_DIGITS = 6  # ms; keeps e.g. u = 0.8 exactly on the SLA boundary


@dataclass(frozen=True)
class ColdStartConfig:
    nominal_seconds: float = 120.0
    jitter_fraction: float = 0.3
    enabled_jitter: bool = True

    def __post_init__(self):
        if not self.nominal_seconds > 0:
            raise ConfigurationError(f"cold-start nominal must be positive, got {self.nominal_seconds!r}")
        if not 0.0 <= self.jitter_fraction <= 0.9:
            raise ConfigurationError(f"jitter_fraction must be in [0, 0.9], got {self.jitter_fraction!r}")

    @property
    def effective_jitter(self) -> float:
        return self.jitter_fraction if self.enabled_jitter else 0.0


@dataclass(frozen=True)
class EstimatorConfig:
    alpha: float = 0.3
    prior_seconds: float = 120.0
    clip_min_seconds: float = 5.0
    clip_max_seconds: float = 600.0
    buffer_steps: int = 1

    def build(self) -> ColdStartEstimator:
        return ColdStartEstimator(self.alpha, self.prior_seconds, self.clip_min_seconds, self.clip_max_seconds)


@dataclass(frozen=True)
class SimConfig:
    step_seconds: float = 60.0
    capacity: CapacityModel = field(default_factory=CapacityModel)
    weights: MpcWeights = field(default_factory=MpcWeights)
    cold_start: ColdStartConfig = field(default_factory=ColdStartConfig)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    base_latency_ms: float = 100.0
    sla_ms: float = 500.0
    hpa_target_utilization: float = 0.7
    hpa_tolerance: float = 0.1
    horizon_mode: str = "fhopt"
    fixed_horizon: int = 2
    des_alpha: float = 0.5
    des_beta: float = 0.2
    ar_max_order: int = 3
    seasonal_period: int = 24

    def validate(self) -> None:
        if not self.step_seconds > 0:
            raise ConfigurationError(f"step_seconds must be positive, got {self.step_seconds!r}")
        est = self.estimator
        est.build()  # raises on bad alpha/prior/bounds
        HorizonParams(self.step_seconds, est.buffer_steps)
        nominal = self.cold_start.nominal_seconds
        if not est.clip_min_seconds <= nominal <= est.clip_max_seconds:
            raise ConfigurationError(
                f"cold_start.nominal_seconds={nominal} outside estimator clip bounds "
                f"[{est.clip_min_seconds}, {est.clip_max_seconds}]")
        if not (0 < self.base_latency_ms < self.sla_ms):
            raise ConfigurationError("need 0 < base_latency_ms < sla_ms")
        if not 0 < self.hpa_target_utilization <= 1:
            raise ConfigurationError("hpa_target_utilization must be in (0, 1]")
        if self.hpa_tolerance < 0:
            raise ConfigurationError("hpa_tolerance must be >= 0")
        if self.horizon_mode not in HORIZON_MODES:
            raise ConfigurationError(f"horizon_mode must be one of {HORIZON_MODES}, got {self.horizon_mode!r}")
        if self.fixed_horizon < 1:
            raise ConfigurationError("fixed_horizon must be >= 1")

    @property
    def cost_per_replica_step(self) -> float:
        """rho: replica-minutes charged per replica per step."""
        return self.step_seconds / 60.0


def latency_of(utilization: float, base_latency_ms: float = 100.0, sla_ms: float = 500.0) -> float:
    """M/M/1 latency ``base / (1 - u)``, saturating at ``3 * sla`` (always for u >= 1)."""
    if utilization < 0:
        raise ValueError(f"utilization must be >= 0, got {utilization!r}")
    cap = 3.0 * sla_ms
    if utilization >= 1.0:
        return cap
    return round(min(base_latency_ms / (1.0 - utilization), cap), LATENCY_RESOLUTION_DIGITS)


@dataclass
class WarmingBatch:
    count: int
    ordered_step: int
    realized_duration_seconds: float
    ready_step: int
    horizon_at_order: int = 1


@dataclass
class SimState:
    step: int
    active_replicas: int
    warming: list[WarmingBatch] = field(default_factory=list)
    initial_active: int = 0
    ordered: int = 0
    graduated: int = 0
    cancelled: int = 0
    scaled_down: int = 0
    order_events: int = 0

    @property
    def warming_replicas(self) -> int:
        return sum(b.count for b in self.warming)


@dataclass(frozen=True)
class StepRecord:
    step: int
    rps: float
    active_replicas: int
    warming_replicas: int
    capacity_rps: float
    utilization: float
    latency_ms: float
    sla_violated: bool
    violation_fraction: float
    cost_units: float
    n_reactive: int
    n_pro: int
    target_replicas: int
    horizon_used: int
    adapt_estimate_seconds: float
    adapt_variance: float | None = None


STEP_CSV_HEADER = ("step,rps,active,warming,capacity,utilization,latency_ms,violated,"
                   "violation_fraction,cost,n_reactive,n_pro,target,horizon,adapt_estimate")


def record_csv_row(r: StepRecord) -> list:
    return [r.step, repr(r.rps), r.active_replicas, r.warming_replicas, repr(r.capacity_rps),
            repr(r.utilization), repr(r.latency_ms), int(r.sla_violated), repr(r.violation_fraction),
            repr(r.cost_units), r.n_reactive, r.n_pro, r.target_replicas, r.horizon_used,
            repr(r.adapt_estimate_seconds)]


@dataclass
class RunResult:
    records: list[StepRecord]
    trace: WorkloadTrace
    policy_kind: str
    forecaster_kind: str | None
    seed: int
    horizon_slacks: list[int]
    objective_total: float
    estimator_summary: object
    counters: dict[str, int]


class Simulation:
    """Mutable single-run simulator; drive it with :meth:`step`."""

    def __init__(self, trace: WorkloadTrace, policy_kind: str, config: SimConfig, seed: int,
                 forecaster: Forecaster | None = None, start_step: int = 0):
        if policy_kind not in POLICY_KINDS:
            raise ConfigurationError(f"unknown policy {policy_kind!r}; expected one of {POLICY_KINDS}")
        if policy_kind == "mpc" and forecaster is None:
            raise ConfigurationError("mpc policy needs a fitted forecaster")
        config.validate()
        self.trace = trace
        self.policy_kind = policy_kind
        self.config = config
        self.forecaster = forecaster
        self.estimator = config.estimator.build()
        self.horizon_params = HorizonParams(config.step_seconds, config.estimator.buffer_steps)
        self.jitter_key = rng.stream_key(seed, "coldstart/jitter")
        cap = config.capacity
        first = cap.clamp(max(1, math.ceil(float(trace.rps[start_step]) / cap.per_replica_rps)))
        self.state = SimState(step=start_step, active_replicas=first, initial_active=first)
        self.horizon_slacks: list[int] = []
        self.objective_total = 0.0
        self._prev_total: int | None = None

    # -- phase helpers -------------------------------------------------

    def _graduate(self, t: int) -> None:
        s = self.state
        ready = [b for b in s.warming if b.ready_step <= t]
        if not ready:
            return
        s.warming = [b for b in s.warming if b.ready_step > t]
        for b in sorted(ready, key=lambda b: (b.ready_step, b.ordered_step)):
            s.active_replicas += b.count
            s.graduated += b.count
            self.estimator.observe_graduation(b.realized_duration_seconds, step=t)
            self.horizon_slacks.append(b.horizon_at_order - (b.ready_step - b.ordered_step))

    def _horizon(self) -> int:
        if self.config.horizon_mode == "fixed":
            return self.config.fixed_horizon
        return derive_horizon(self.estimator.estimate_seconds, self.horizon_params)

    def _decide(self, rps: float) -> PolicyDecision:
        cfg = self.config
        n_a = self.state.active_replicas
        if self.policy_kind == "hpa":
            return hpa_decide(rps, n_a, cfg.capacity, cfg.hpa_target_utilization, cfg.hpa_tolerance)
        h = self._horizon()
        fc = self.forecaster.forecast(h)
        return mpc_decide(rps, n_a, fc.values, h, cfg.capacity, cfg.weights)

    def _apply(self, t: int, target: int, horizon: int) -> None:
        s = self.state
        cap = self.config.capacity
        total = s.active_replicas + s.warming_replicas
        if target > total:
            count = min(target, cap.n_max) - total
            if count <= 0:
                return
            j = self.config.cold_start.effective_jitter
            u = rng.uniform_at(self.jitter_key, s.order_events)
            duration = self.config.cold_start.nominal_seconds * (1.0 - j + 2.0 * j * u)
            ready = t + math.ceil(duration / self.config.step_seconds)
            s.warming.append(WarmingBatch(count, t, duration, ready, horizon))
            s.warming.sort(key=lambda b: (b.ready_step, b.ordered_step))
            s.order_events += 1
            s.ordered += count
        elif target < total:
            excess = total - target
            # cancel in-flight capacity newest-first
            for b in sorted(s.warming, key=lambda b: b.ordered_step, reverse=True):
                if excess == 0:
                    break
                take = min(b.count, excess)
                b.count -= take
                excess -= take
                s.cancelled += take
            s.warming = [b for b in s.warming if b.count > 0]
            if excess:
                removable = s.active_replicas - max(target, cap.n_min)
                take = min(excess, max(removable, 0))
                s.active_replicas -= take
                s.scaled_down += take

    def audit(self) -> None:
        s = self.state
        cap = self.config.capacity
        n_w = s.warming_replicas
        if n_w != s.ordered - s.graduated - s.cancelled:
            raise AccountingError(f"step {s.step}: warming {n_w} != ordered {s.ordered} - graduated "
                                  f"{s.graduated} - cancelled {s.cancelled}")
        if s.active_replicas != s.initial_active + s.graduated - s.scaled_down:
            raise AccountingError(f"step {s.step}: active {s.active_replicas} != initial {s.initial_active} "
                                  f"+ graduated {s.graduated} - scaled_down {s.scaled_down}")
        if s.active_replicas < cap.n_min or s.active_replicas + n_w > cap.n_max:
            raise AccountingError(f"step {s.step}: replicas outside [{cap.n_min}, {cap.n_max}]")
        if any(b.ready_step <= s.step for b in s.warming):
            raise AccountingError(f"step {s.step}: a batch is past its ready step but still warming")

    # -- the step ------------------------------------------------------

    def step(self, t: int) -> StepRecord:
        cfg = self.config
        s = self.state
        s.step = t
        rps = float(self.trace.rps[t])
        self.estimator.tick(t)

        self._graduate(t)

        n_a = s.active_replicas
        n_w = s.warming_replicas
        capacity = n_a * cfg.capacity.per_replica_rps
        u = rps / capacity
        latency = latency_of(u, cfg.base_latency_ms, cfg.sla_ms)
        v = max(0.0, (rps - capacity) / rps) if rps > 0 else 0.0
        cost = (n_a + n_w) * cfg.cost_per_replica_step
        n_total = n_a + n_w
        prev = n_total if self._prev_total is None else self._prev_total
        self.objective_total += objective_step_cost(v, n_total, prev, cfg.capacity.n_max, cfg.weights)
        self._prev_total = n_total
        estimate = self.estimator.estimate_seconds
        variance = self.estimator.variance()

        if self.forecaster is not None:
            self.forecaster.update(rps)

        decision = self._decide(rps)
        self._apply(t, decision.target_replicas, decision.horizon_used)
        self.audit()

        return StepRecord(
            step=t, rps=rps, active_replicas=n_a, warming_replicas=n_w, capacity_rps=capacity,
            utilization=u, latency_ms=latency, sla_violated=latency > cfg.sla_ms,
            violation_fraction=v, cost_units=cost, n_reactive=decision.reactive_floor,
            n_pro=decision.proactive_target, target_replicas=decision.target_replicas,
            horizon_used=decision.horizon_used, adapt_estimate_seconds=estimate, adapt_variance=variance)


def prepare_forecaster(kind: str, trace: WorkloadTrace, config: SimConfig) -> Forecaster:
    """Fit on the train split, then replay validation through ``update``."""
    sp = split(trace)
    train = trace.rps[:sp.train_end]
    val = trace.rps[sp.train_end:sp.val_end]
    if kind == "ar_ls":
        order = select_ar_order(train, val, config.ar_max_order)
        model: Forecaster = AutoRegressive(order).fit(train)
    elif kind == "des":
        model = make_forecaster("des", alpha=config.des_alpha, beta=config.des_beta).fit(train)
    elif kind == "seasonal_naive":
        model = make_forecaster("seasonal_naive", period=config.seasonal_period).fit(train)
    else:
        model = make_forecaster(kind).fit(train)
    for v in val:
        model.update(float(v))
    return model


def run(trace: WorkloadTrace, policy_kind: str, forecaster_kind: str | None, config: SimConfig,
        seed: int, on_step: Callable[[StepRecord], None] | None = None) -> RunResult:
    """Simulate the test split of ``trace``; deterministic in (trace, config, seed)."""
    config.validate()
    if policy_kind not in POLICY_KINDS:
        raise ConfigurationError(f"unknown policy {policy_kind!r}; expected one of {POLICY_KINDS}")
    if abs(trace.step_seconds - config.step_seconds) > 1e-12:
        raise ConfigurationError(
            f"trace step ({trace.step_seconds}s) differs from simulator step ({config.step_seconds}s)")
    sp = split(trace)
    forecaster = None
    if policy_kind == "mpc":
        if forecaster_kind is None:
            raise ConfigurationError("mpc policy needs a forecaster kind")
        forecaster = prepare_forecaster(forecaster_kind, trace, config)
    sim = Simulation(trace, policy_kind, config, seed, forecaster, start_step=sp.val_end)
    records = []
    for t in range(sp.val_end, sp.test_end):
        rec = sim.step(t)
        records.append(rec)
        if on_step is not None:
            on_step(rec)
    s = sim.state
    counters = {"ordered": s.ordered, "graduated": s.graduated, "cancelled": s.cancelled,
                "scaled_down": s.scaled_down, "order_events": s.order_events,
                "initial_active": s.initial_active, "final_active": s.active_replicas,
                "final_warming": s.warming_replicas}
    return RunResult(records, trace, policy_kind, forecaster_kind if policy_kind == "mpc" else None,
                     int(seed), sim.horizon_slacks, sim.objective_total, sim.estimator.summary(), counters)


def mean_horizon_slack(result: RunResult) -> float | None:
    return float(np.mean(result.horizon_slacks)) if result.horizon_slacks else None
