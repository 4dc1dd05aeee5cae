"""Experiment configuration.

A YAML file holds a key-value tree; every key is optional and missing values
take the defaults below. ``ExperimentConfig.to_dict`` returns the fully
resolved tree, which every output JSON embeds.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .engine import ColdStartConfig, EstimatorConfig, SimConfig
from .errors import ConfigurationError
from .forecast import METHODS
from .policy import CapacityModel, MpcWeights
from .trace import ARCHETYPES, DEFAULT_PARAMS, resolve_params

DEFAULT_SEEDS = (42, 123, 456, 789, 1337)
DEFAULT_POLICIES = (("hpa", None), ("mpc", "des"), ("mpc", "ar_ls"))
# the "simple" and "rich" forecaster roles in the policy matrix
FORECASTER_ROLES = {"simple": "des", "rich": "ar_ls"}
SENSITIVITY_LEVELS = (30.0, 60.0, 120.0, 180.0, 300.0)


@dataclass(frozen=True)
class LatencyConfig:
    base_ms: float = 100.0
    sla_ms: float = 500.0


@dataclass(frozen=True)
class HpaConfig:
    target_utilization: float = 0.7
    tolerance: float = 0.1


@dataclass(frozen=True)
class ForecasterConfig:
    des_alpha: float = 0.5
    des_beta: float = 0.2
    ar_max_order: int = 3
    seasonal_period: int = 24


@dataclass(frozen=True)
class SweepConfig:
    levels: tuple[float, ...] = SENSITIVITY_LEVELS
    archetypes: tuple[str, ...] | None = None  # None: all configured archetypes


@dataclass(frozen=True)
class AbTestConfig:
    archetypes: tuple[str, ...] = ("diurnal_burst", "flash_crowd")
    fixed_horizon: int = 2
    forecaster: str = "ar_ls"


@dataclass(frozen=True)
class ExperimentConfig:
    archetypes: tuple[str, ...] = ARCHETYPES
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    policies: tuple[tuple[str, str | None], ...] = DEFAULT_POLICIES
    num_steps: int = 500
    step_seconds: float = 60.0
    trace_params: Mapping[str, Mapping[str, float]] = field(default_factory=dict)
    cold_start: ColdStartConfig = field(default_factory=ColdStartConfig)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    capacity: CapacityModel = field(default_factory=CapacityModel)
    weights: MpcWeights = field(default_factory=MpcWeights)
    latency: LatencyConfig = field(default_factory=LatencyConfig)
    hpa: HpaConfig = field(default_factory=HpaConfig)
    forecasters: ForecasterConfig = field(default_factory=ForecasterConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    abtest: AbTestConfig = field(default_factory=AbTestConfig)
    output_dir: str = "out"
    workers: int = 1

    def validate(self) -> None:
        if not self.seeds:
            raise ConfigurationError("seeds: must be non-empty")
        for s in self.seeds:
            if int(s) != s or s < 0:
                raise ConfigurationError(f"seeds: {s!r} is not a non-negative integer")
        if not self.archetypes:
            raise ConfigurationError("archetypes: must be non-empty")
        for name in self.archetypes:
            if name not in ARCHETYPES:
                raise ConfigurationError(f"archetypes: unknown archetype {name!r}")
        for name, params in self.trace_params.items():
            if name not in ARCHETYPES:
                raise ConfigurationError(f"trace_params: unknown archetype {name!r}")
            resolve_params(name, params)
        if not self.policies:
            raise ConfigurationError("policies: must be non-empty")
        for policy, fc in self.policies:
            if policy == "hpa":
                if fc is not None:
                    raise ConfigurationError("policies: hpa takes no forecaster")
            elif policy == "mpc":
                if fc not in METHODS:
                    raise ConfigurationError(f"policies: unknown forecaster {fc!r} for mpc")
            else:
                raise ConfigurationError(f"policies: unknown policy {policy!r}")
        if int(self.num_steps) != self.num_steps or self.num_steps < 10:
            raise ConfigurationError("num_steps: must be an integer >= 10")
        if self.workers < 1:
            raise ConfigurationError("workers: must be >= 1")
        for name in (self.sweep.archetypes or ()):
            if name not in ARCHETYPES:
                raise ConfigurationError(f"sweep.archetypes: unknown archetype {name!r}")
        for name in self.abtest.archetypes:
            if name not in ARCHETYPES:
                raise ConfigurationError(f"abtest.archetypes: unknown archetype {name!r}")
        if self.abtest.forecaster not in METHODS:
            raise ConfigurationError(f"abtest.forecaster: unknown forecaster {self.abtest.forecaster!r}")
        if self.abtest.fixed_horizon < 1:
            raise ConfigurationError("abtest.fixed_horizon: must be >= 1")
        for level in self.sweep.levels:
            self.sim_config(nominal_seconds=float(level)).validate()
        self.sim_config().validate()

    def sim_config(self, nominal_seconds: float | None = None, horizon_mode: str = "fhopt",
                   fixed_horizon: int | None = None) -> SimConfig:
        cold = self.cold_start
        if nominal_seconds is not None:
            cold = dataclasses.replace(cold, nominal_seconds=float(nominal_seconds))
        return SimConfig(
            step_seconds=self.step_seconds, capacity=self.capacity, weights=self.weights,
            cold_start=cold, estimator=self.estimator,
            base_latency_ms=self.latency.base_ms, sla_ms=self.latency.sla_ms,
            hpa_target_utilization=self.hpa.target_utilization, hpa_tolerance=self.hpa.tolerance,
            horizon_mode=horizon_mode,
            fixed_horizon=self.abtest.fixed_horizon if fixed_horizon is None else fixed_horizon,
            des_alpha=self.forecasters.des_alpha, des_beta=self.forecasters.des_beta,
            ar_max_order=self.forecasters.ar_max_order,
            seasonal_period=self.forecasters.seasonal_period)

    def resolved_trace_params(self, archetype: str) -> dict[str, float]:
        return resolve_params(archetype, self.trace_params.get(archetype))

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["archetypes"] = list(self.archetypes)
        d["seeds"] = list(self.seeds)
        d["policies"] = [[p, f] for p, f in self.policies]
        d["trace_params"] = {a: self.resolved_trace_params(a) for a in ARCHETYPES}
        d["sweep"]["levels"] = list(self.sweep.levels)
        d["sweep"]["archetypes"] = list(self.sweep.archetypes) if self.sweep.archetypes else None
        d["abtest"]["archetypes"] = list(self.abtest.archetypes)
        return _plain(d)


def _plain(value: Any) -> Any:
    if isinstance(value, Mapping):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


_SECTIONS = {
    "cold_start": ColdStartConfig, "estimator": EstimatorConfig, "capacity": CapacityModel,
    "weights": MpcWeights, "latency": LatencyConfig, "hpa": HpaConfig,
    "forecasters": ForecasterConfig, "sweep": SweepConfig, "abtest": AbTestConfig,
}


def _section(name: str, cls, raw: Any):
    if raw is None:
        return cls()
    if not isinstance(raw, Mapping):
        raise ConfigurationError(f"{name}: expected a mapping")
    known = {f.name for f in dataclasses.fields(cls)}
    for key in raw:
        if key not in known:
            raise ConfigurationError(f"{name}.{key}: unknown field")
    kwargs = {}
    for key, value in raw.items():
        if isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except ConfigurationError as exc:
        raise ConfigurationError(f"{name}: {exc}") from None
    except TypeError as exc:
        raise ConfigurationError(f"{name}: {exc}") from None


def _parse_policy(item: Any) -> tuple[str, str | None]:
    if isinstance(item, str):
        if item == "hpa":
            return ("hpa", None)
        if item.startswith("mpc-"):
            fc = item[len("mpc-"):]
            return ("mpc", FORECASTER_ROLES.get(fc, fc))
        raise ConfigurationError(f"policies: cannot parse {item!r} (use 'hpa' or 'mpc-<forecaster>')")
    if isinstance(item, (list, tuple)) and len(item) == 2:
        policy, fc = item
        if policy == "mpc" and fc in FORECASTER_ROLES:
            fc = FORECASTER_ROLES[fc]
        return (str(policy), None if fc is None else str(fc))
    raise ConfigurationError(f"policies: cannot parse {item!r}")


def config_from_mapping(raw: Mapping[str, Any] | None) -> ExperimentConfig:
    raw = dict(raw or {})
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    for key in raw:
        if key not in known:
            raise ConfigurationError(f"{key}: unknown field")
    kwargs: dict[str, Any] = {}
    for key, value in raw.items():
        if key in _SECTIONS:
            kwargs[key] = _section(key, _SECTIONS[key], value)
        elif key == "policies":
            kwargs[key] = tuple(_parse_policy(p) for p in value)
        elif key in ("archetypes", "seeds"):
            if not isinstance(value, (list, tuple)):
                raise ConfigurationError(f"{key}: expected a list")
            kwargs[key] = tuple(int(v) for v in value) if key == "seeds" else tuple(value)
        elif key == "trace_params":
            if not isinstance(value, Mapping):
                raise ConfigurationError("trace_params: expected a mapping")
            kwargs[key] = {k: dict(v or {}) for k, v in value.items()}
        else:
            kwargs[key] = value
    cfg = ExperimentConfig(**kwargs)
    cfg.validate()
    return cfg


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return config_from_mapping({})
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if raw is not None and not isinstance(raw, Mapping):
        raise ConfigurationError(f"{path}: top level must be a mapping")
    return config_from_mapping(raw)


def default_config_yaml() -> str:
    """The fully materialized default configuration as YAML."""
    return yaml.safe_dump(ExperimentConfig().to_dict(), sort_keys=False)


__all__ = ["ExperimentConfig", "LatencyConfig", "HpaConfig", "ForecasterConfig", "SweepConfig",
           "AbTestConfig", "config_from_mapping", "load_config", "default_config_yaml",
           "DEFAULT_SEEDS", "DEFAULT_POLICIES", "SENSITIVITY_LEVELS", "DEFAULT_PARAMS"]
