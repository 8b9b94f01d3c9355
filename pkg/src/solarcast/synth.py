"""Seeded synthetic irradiance data for end-to-end runs and tests.

Generates 1-min irradiance I = I_e * c where c is a mean-reverting cloud
factor in [0, 1.1] built from three seeded components:

* a day-to-day AR(1) level (persistent sunny/cloudy regimes),
* an intraday AR(1) with a correlation time of a few hours,
* a deterministic early-afternoon dip (convective clouding).

The day-scale regime and the diurnal dip give seasonal (previous-day) lags
real predictive value; the intraday mean reversion makes plain persistence
strong at 15 min but weak at 3 h.
"""

from __future__ import annotations

from datetime import datetime, timedelta

import numpy as np

from .data_pipeline import MAX_IRRADIANCE_WM2, TimeSeries
from .solar_geometry import GeoLocation, extraterrestrial_irradiance

MINUTES_PER_DAY = 1440

_LEVEL_MEAN = 0.68
_LEVEL_RHO = 0.55
_LEVEL_SIGMA = 0.16
_INTRADAY_CORR_MINUTES = 150.0
_INTRADAY_SIGMA = 0.15
_DIP_DEPTH = 0.08
_DIP_PEAK_MINUTE = 14 * 60  # local clock time of the deepest dip
_DIP_WIDTH_MINUTES = 200.0


def cloud_factor(days: int, seed: int, utc_offset_min: int = 0) -> np.ndarray:
    """Per-minute cloud transmission factor in [0, 1.1]."""
    rng = np.random.default_rng(seed)
    n = days * MINUTES_PER_DAY

    level = np.empty(days)
    level[0] = _LEVEL_MEAN + rng.normal(0.0, _LEVEL_SIGMA)
    for d in range(1, days):
        level[d] = (
            _LEVEL_MEAN
            + _LEVEL_RHO * (level[d - 1] - _LEVEL_MEAN)
            + rng.normal(0.0, _LEVEL_SIGMA)
        )
    level = np.clip(level, 0.25, 0.95)

    rho = float(np.exp(-1.0 / _INTRADAY_CORR_MINUTES))
    shock_scale = _INTRADAY_SIGMA * np.sqrt(1.0 - rho * rho)
    shocks = rng.normal(0.0, shock_scale, n)
    intraday = np.empty(n)
    intraday[0] = rng.normal(0.0, _INTRADAY_SIGMA)
    for t in range(1, n):
        intraday[t] = rho * intraday[t - 1] + shocks[t]

    local_minute = (np.arange(n) + utc_offset_min) % MINUTES_PER_DAY
    dip = -_DIP_DEPTH * np.exp(
        -0.5 * ((local_minute - _DIP_PEAK_MINUTE) / _DIP_WIDTH_MINUTES) ** 2
    )

    c = np.repeat(level, MINUTES_PER_DAY) + intraday + dip
    return np.clip(c, 0.0, 1.1)


def synthetic_irradiance(
    location: GeoLocation,
    days: int,
    seed: int,
    start: datetime | None = None,
) -> TimeSeries:
    """Seeded 1-min synthetic irradiance series (needs at least 8 days)."""
    if days < 8:
        raise ValueError("synthetic datasets need at least 8 days")
    if start is None:
        start = datetime(2021, 4, 1, 0, 0)
    n = days * MINUTES_PER_DAY
    mids = (
        np.datetime64(start, "s")
        + np.arange(n) * np.timedelta64(60, "s")
        + np.timedelta64(30, "s")
    )
    ie = extraterrestrial_irradiance(location, mids)
    c = cloud_factor(days, seed, location.utc_offset_min)
    values = np.minimum(ie * c, MAX_IRRADIANCE_WM2)
    return TimeSeries(
        start=start,
        step=timedelta(minutes=1),
        values=values,
        location=location,
        kind="irradiance",
    )
