"""Pluggable demand forecasters.

Every forecaster follows the same protocol: ``fit`` once on a training series,
``update`` with one observation per step (constant work, no refit), and
``forecast(h)`` for the next ``h`` steps. Forecasts are clamped at zero.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, FitError, ProtocolError

METHODS = ("persistence", "seasonal_naive", "des", "ar_ls")


@dataclass(frozen=True)
class Forecast:
    values: np.ndarray
    issued_at: int

    def __len__(self) -> int:
        return int(self.values.shape[0])


def _as_series(series: Sequence[float]) -> np.ndarray:
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 1:
        raise FitError("training series must be one-dimensional")
    if not np.all(np.isfinite(x)) or np.any(x < 0):
        raise FitError("training series must be finite and non-negative")
    return x


def _check_observation(value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value < 0:
        raise ValueError(f"observation must be finite and non-negative, got {value!r}")
    return value


class Forecaster:
    method = "base"
    min_train = 1

    def __init__(self):
        self.fitted = False
        self.steps_seen = 0

    def fit(self, train_series: Sequence[float]) -> "Forecaster":
        x = _as_series(train_series)
        if x.shape[0] < self.min_train:
            raise FitError(f"{self.method} needs at least {self.min_train} training points, "
                           f"got {x.shape[0]}")
        self._fit(x)
        self.fitted = True
        self.steps_seen = int(x.shape[0])
        return self

    def update(self, observation: float) -> "Forecaster":
        if not self.fitted:
            raise ProtocolError(f"{self.method}: update() called before fit()")
        self._update(_check_observation(observation))
        self.steps_seen += 1
        return self

    def forecast(self, horizon: int) -> Forecast:
        if not self.fitted:
            raise ProtocolError(f"{self.method}: forecast() called before fit()")
        if int(horizon) != horizon or horizon < 1:
            raise ValueError(f"horizon must be an integer >= 1, got {horizon!r}")
        values = np.maximum(self._predict(int(horizon)), 0.0)
        return Forecast(values, self.steps_seen - 1)

    def _fit(self, x: np.ndarray) -> None:
        raise NotImplementedError

    def _update(self, value: float) -> None:
        raise NotImplementedError

    def _predict(self, horizon: int) -> np.ndarray:
        raise NotImplementedError


class Persistence(Forecaster):
    method = "persistence"

    def _fit(self, x):
        self.last = float(x[-1])

    def _update(self, value):
        self.last = value

    def _predict(self, horizon):
        return np.full(horizon, self.last)


class SeasonalNaive(Forecaster):
    """Repeats the value observed one season earlier."""

    method = "seasonal_naive"

    def __init__(self, period: int = 24):
        super().__init__()
        if int(period) != period or period < 1:
            raise ConfigurationError(f"seasonal period must be a positive integer, got {period!r}")
        self.period = int(period)
        self.min_train = self.period

    def _fit(self, x):
        self.history = deque((float(v) for v in x[-self.period:]), maxlen=self.period)

    def _update(self, value):
        self.history.append(value)

    def _predict(self, horizon):
        season = np.fromiter(self.history, dtype=np.float64, count=self.period)
        return season[np.arange(horizon) % self.period]


class DoubleExponentialSmoothing(Forecaster):
    """Holt's linear method: level/trend smoothing, forecast ``level + k * trend``."""

    method = "des"
    min_train = 2

    def __init__(self, alpha: float = 0.5, beta: float = 0.2):
        super().__init__()
        for name, v in (("alpha", alpha), ("beta", beta)):
            if not 0.0 < v <= 1.0:
                raise ConfigurationError(f"des {name} must be in (0, 1], got {v!r}")
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.level = 0.0
        self.trend = 0.0

    def _fit(self, x):
        self.level = float(x[0])
        self.trend = float(x[1] - x[0])
        for v in x[1:]:
            self._update(float(v))

    def _update(self, value):
        prev = self.level
        self.level = self.alpha * value + (1.0 - self.alpha) * (prev + self.trend)
        self.trend = self.beta * (self.level - prev) + (1.0 - self.beta) * self.trend

    def _predict(self, horizon):
        return self.level + self.trend * np.arange(1, horizon + 1, dtype=np.float64)


def _ar_design(x: np.ndarray, order: int, intercept: bool) -> tuple[np.ndarray, np.ndarray]:
    n = x.shape[0]
    lags = np.column_stack([x[order - k:n - k] for k in range(1, order + 1)])
    if intercept:
        lags = np.column_stack([np.ones(n - order), lags])
    return lags, x[order:]


def fit_ar(x: np.ndarray, order: int, intercept: bool = False) -> tuple[float, np.ndarray]:
    """Least-squares AR(order); returns (intercept, lag coefficients).

    Without an intercept a level series fits coefficients summing to about one,
    so forecasts track the current level instead of reverting to the train mean.
    """
    design, target = _ar_design(np.asarray(x, dtype=np.float64), order, intercept)
    beta, *_ = np.linalg.lstsq(design, target, rcond=None)
    if intercept:
        return float(beta[0]), beta[1:].copy()
    return 0.0, beta.copy()


class AutoRegressive(Forecaster):
    """AR(p) fitted once by least squares; updates only shift the lag window."""

    method = "ar_ls"

    def __init__(self, order: int = 3, intercept: bool = False):
        super().__init__()
        if int(order) != order or order < 1:
            raise ConfigurationError(f"AR order must be a positive integer, got {order!r}")
        self.order = int(order)
        self.use_intercept = bool(intercept)
        self.min_train = 2 * self.order + 1
        self.intercept = 0.0
        self.coef = np.zeros(self.order)

    def _fit(self, x):
        self.intercept, self.coef = fit_ar(x, self.order, self.use_intercept)
        self.lags = deque((float(v) for v in x[-self.order:]), maxlen=self.order)

    def _update(self, value):
        self.lags.append(value)

    def _predict(self, horizon):
        # window[-1] is the newest value; coef[0] multiplies lag 1
        window = list(self.lags)
        out = np.empty(horizon)
        for k in range(horizon):
            nxt = self.intercept
            for j in range(self.order):
                nxt += self.coef[j] * window[-1 - j]
            out[k] = nxt
            window.append(nxt)
        return out


def one_step_mae(model: Forecaster, series: Sequence[float]) -> float:
    """Mean absolute one-step-ahead error over ``series``; advances ``model`` online."""
    errors = []
    for v in series:
        errors.append(abs(model.forecast(1).values[0] - v))
        model.update(v)
    return float(np.mean(errors)) if errors else 0.0


def select_ar_order(train: Sequence[float], validation: Sequence[float], max_order: int = 3) -> int:
    """Order in 1..max_order with the lowest validation one-step MAE (smallest on ties)."""
    best, best_mae = None, math.inf
    for p in range(1, max_order + 1):
        if len(train) < 2 * p + 1:
            break
        mae = one_step_mae(AutoRegressive(p).fit(train), validation)
        if mae < best_mae:
            best, best_mae = p, mae
    if best is None:
        raise FitError(f"ar_ls needs at least 3 training points, got {len(train)}")
    return best


def make_forecaster(method: str, **params) -> Forecaster:
    if method == "persistence":
        return Persistence()
    if method == "seasonal_naive":
        return SeasonalNaive(**params)
    if method == "des":
        return DoubleExponentialSmoothing(**params)
    if method == "ar_ls":
        return AutoRegressive(**params)
    raise ConfigurationError(f"unknown forecaster {method!r}; expected one of {METHODS}")
