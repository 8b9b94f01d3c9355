"""Forecaster contract, persistence baselines, and the recursive engine.

A forecaster is a fitted one-step predictor ``f`` applied to a lag vector
assembled from the series. Multi-step forecasts iterate ``f``: at step ``j``
the lag vector is built from observed history where a lag offset reaches the
forecast origin or earlier, and from the model's own earlier predictions
where it reaches past the origin.

The engine is written for a batch of forecast origins sharing one observed
series; the single-origin form is the one-row special case.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any

import numpy as np

from .data_pipeline import TimeSeries, to_transmissivity
from .errors import InsufficientDataError
from .solar_geometry import extraterrestrial_irradiance

DEFAULT_HORIZON = 12


@dataclass(frozen=True)
class ForecastVector:
    """Multi-step forecast issued from one origin index."""

    origin: int
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)


class Forecaster(ABC):
    """One-step predictor usable by the recursive engine.

    ``required_lags`` lists nonpositive offsets relative to the current
    index: offset 0 is the newest value, -1 the one before, and so on.
    """

    @abstractmethod
    def required_lags(self) -> np.ndarray:
        """Lag offsets (ints <= 0) defining the predictor's input vector."""

    @abstractmethod
    def predict_one(self, lag_vector: np.ndarray) -> float:
        """One-step prediction from a single lag vector."""

    def begin(self, history: np.ndarray, origins: np.ndarray, horizon: int) -> Any:
        """Per-trajectory state set up once per forecast batch (default: none)."""
        return None

    def predict_step(self, lag_matrix: np.ndarray, state: Any, step: int) -> np.ndarray:
        """Batched one-step prediction (rows = origins). Default loops predict_one.

        Step counts from 1; stateful models may consult ``state`` and
        ``step``. Rows may come back NaN to mark a failed trajectory.
        """
        return np.array([self.predict_one(row) for row in lag_matrix])


def recursive_forecast_matrix(
    model: Forecaster, history: np.ndarray, origins: np.ndarray, horizon: int
) -> np.ndarray:
    """Recursive multi-step forecasts for many origins over one series.

    ``history[i]`` must be the observation at time index ``i``; each origin
    ``t`` uses observations up to and including ``t`` plus its own earlier
    predictions. Returns an (n_origins, horizon) array.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    history = np.asarray(history, dtype=np.float64)
    origins = np.asarray(origins, dtype=np.int64)
    offsets = np.asarray(model.required_lags(), dtype=np.int64)
    if offsets.size and offsets.max() > 0:
        raise ValueError("lag offsets must be <= 0")
    deepest = int(-offsets.min()) if offsets.size else 0
    if origins.size and int(origins.min()) < deepest:
        raise InsufficientDataError(
            f"model needs {deepest} past steps; earliest usable origin is index {deepest}"
        )
    if origins.size and int(origins.max()) >= len(history):
        raise InsufficientDataError("origin beyond the observed history")

    state = model.begin(history, origins, horizon)
    preds = np.empty((len(origins), horizon), dtype=np.float64)
    col = origins[:, None]
    for step in range(1, horizon + 1):
        idx = col + (step - 1) + offsets[None, :]
        observed = idx <= col
        lag = np.where(
            observed,
            history[np.clip(idx, 0, len(history) - 1)],
            preds[
                np.arange(len(origins))[:, None],
                np.clip(idx - col - 1, 0, horizon - 1),
            ],
        )
        preds[:, step - 1] = model.predict_step(lag, state, step)
    return preds


def recursive_forecast(model: Forecaster, history: np.ndarray, horizon: int) -> ForecastVector:
    """Recursive multi-step forecast from the last index of ``history``."""
    history = np.asarray(history, dtype=np.float64)
    origin = len(history) - 1
    preds = recursive_forecast_matrix(model, history, np.array([origin]), horizon)
    return ForecastVector(origin=origin, values=preds[0])


class PersistenceForecaster(Forecaster):
    """Repeats the newest value; the non-seasonal persistence baseline."""

    def required_lags(self) -> np.ndarray:
        return np.array([0])

    def predict_one(self, lag_vector: np.ndarray) -> float:
        return float(lag_vector[0])

    def predict_step(self, lag_matrix: np.ndarray, state: Any, step: int) -> np.ndarray:
        return lag_matrix[:, 0]


class SeasonalPersistenceForecaster(Forecaster):
    """Repeats the value one season back: prediction for t+j is y[t+j-s]."""

    def __init__(self, season: int):
        if season < 1:
            raise ValueError("season must be >= 1")
        self.season = season

    def required_lags(self) -> np.ndarray:
        return np.array([-(self.season - 1)])

    def predict_one(self, lag_vector: np.ndarray) -> float:
        return float(lag_vector[0])

    def predict_step(self, lag_matrix: np.ndarray, state: Any, step: int) -> np.ndarray:
        return lag_matrix[:, 0]


def persistence_predict(history: np.ndarray) -> float:
    """The newest observed value."""
    history = np.asarray(history, dtype=np.float64)
    if history.size == 0:
        raise InsufficientDataError("history is empty")
    return float(history[-1])


def seasonal_persistence_predict(history: np.ndarray, step: int, season: int) -> float:
    """The value observed one season before target step ``step`` (y[t+step-season])."""
    history = np.asarray(history, dtype=np.float64)
    back = season - step
    if back < 0:
        raise ValueError("step beyond the season is not observed history")
    if back >= len(history):
        raise InsufficientDataError(
            f"need {back + 1} observations for season {season}, step {step}"
        )
    return float(history[len(history) - 1 - back])


def reference_persistence_forecast(
    series: TimeSeries, origin: int, horizon: int = DEFAULT_HORIZON
) -> ForecastVector:
    """Transmissivity-persistence reference forecast in irradiance units.

    Holds the origin's transmissivity constant and rescales by the
    extraterrestrial irradiance at each target step, so the forecast tracks
    the deterministic clear-sky shape.
    """
    if series.kind != "irradiance":
        raise ValueError("reference forecast expects an irradiance series")
    if not 0 <= origin < len(series.values):
        raise InsufficientDataError("origin outside the series")
    tau = to_transmissivity(series.slice(origin, origin + 1)).values[0]
    target_mid = series.midpoints()[0] + (
        np.arange(origin + 1, origin + horizon + 1)
        * np.timedelta64(int(series.step.total_seconds()), "s")
    )
    ie = extraterrestrial_irradiance(series.location, target_mid)
    return ForecastVector(origin=origin, values=np.maximum(tau * ie, 0.0))
