"""Solar position, day/night classification, and extraterrestrial irradiance.

The zenith angle is computed with the Astronomical Almanac's approximate
solar ephemeris (Michalsky 1988), which stays within a few hundredths of a
degree of high-precision algorithms over 1950-2100.  That is far inside the
0.2 degree tolerance that matters for irradiance normalization, at a tiny
fraction of the cost of a full NREL-style ephemeris.

All functions accept either a timezone-aware/naive UTC ``datetime`` or a
``numpy.datetime64`` array and are pure; arrays vectorize over time.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .errors import EphemerisRangeError

SOLAR_CONSTANT_WM2 = 1360.8
#: Zenith angle of the refraction-corrected horizon; larger values are night.
NIGHT_ZENITH_DEG = 90.83

_J2000 = np.datetime64("2000-01-01T12:00:00", "s")
_VALID_FROM = np.datetime64("1950-01-01T00:00:00", "s")
_VALID_UNTIL = np.datetime64("2101-01-01T00:00:00", "s")


@dataclass(frozen=True)
class GeoLocation:
    """Observer position. Longitude is positive east, elevation in meters."""

    latitude: float
    longitude: float
    elevation_m: float = 0.0
    utc_offset_min: int = 0

    def __post_init__(self):
        if not -90.0 <= self.latitude <= 90.0:
            raise ValueError(f"latitude {self.latitude} outside [-90, 90]")
        if not -180.0 <= self.longitude <= 180.0:
            raise ValueError(f"longitude {self.longitude} outside [-180, 180]")
        if self.elevation_m < -500.0:
            raise ValueError(f"elevation {self.elevation_m} below -500 m")
        if not -14 * 60 <= self.utc_offset_min <= 14 * 60:
            raise ValueError(f"utc_offset_min {self.utc_offset_min} outside [-840, 840]")


@dataclass(frozen=True)
class SolarState:
    """Sun geometry at one instant: zenith (deg), orbit eccentricity factor,
    horizontal extraterrestrial irradiance (W/m^2), and day/night flag."""

    zenith: float
    eccentricity: float
    extraterrestrial_irradiance: float
    is_daytime: bool


def _as_datetime64(when) -> np.ndarray:
    """Convert datetime / datetime64 / arrays thereof to datetime64[s] (UTC)."""
    if isinstance(when, datetime):
        if when.tzinfo is not None:
            when = when.astimezone(timezone.utc).replace(tzinfo=None)
        return np.datetime64(when, "s")
    return np.asarray(when, dtype="datetime64[s]")


def _check_validity(t64: np.ndarray) -> None:
    if np.any(t64 < _VALID_FROM) or np.any(t64 >= _VALID_UNTIL):
        raise EphemerisRangeError("timestamp outside the 1950-2100 ephemeris window")


def _days_since_j2000(t64: np.ndarray) -> np.ndarray:
    return (t64 - _J2000) / np.timedelta64(86400, "s")


def solar_zenith(location: GeoLocation, when) -> float | np.ndarray:
    """Geometric solar zenith angle in degrees, in [0, 180).

    Deterministic; valid for timestamps in 1950-2100 (raises
    EphemerisRangeError outside that window).
    """
    t64 = _as_datetime64(when)
    _check_validity(t64)
    n = _days_since_j2000(t64)

    mean_long = (280.460 + 0.9856474 * n) % 360.0
    mean_anom = np.radians((357.528 + 0.9856003 * n) % 360.0)
    ecl_long = np.radians(
        (mean_long + 1.915 * np.sin(mean_anom) + 0.020 * np.sin(2.0 * mean_anom)) % 360.0
    )
    obliquity = np.radians(23.439 - 4.0e-7 * n)

    right_asc = np.arctan2(np.cos(obliquity) * np.sin(ecl_long), np.cos(ecl_long))
    declination = np.arcsin(np.sin(obliquity) * np.sin(ecl_long))

    ut_hours = (t64 - t64.astype("datetime64[D]")).astype(np.float64) / 3600.0
    gmst_hours = (6.697375 + 0.0657098242 * n + ut_hours) % 24.0
    local_sidereal_deg = gmst_hours * 15.0 + location.longitude
    hour_angle = np.radians((local_sidereal_deg - np.degrees(right_asc) + 180.0) % 360.0 - 180.0)

    lat = np.radians(location.latitude)
    cos_zenith = np.sin(lat) * np.sin(declination) + np.cos(lat) * np.cos(declination) * np.cos(
        hour_angle
    )
    zenith = np.degrees(np.arccos(np.clip(cos_zenith, -1.0, 1.0)))
    return float(zenith) if np.isscalar(n) or zenith.ndim == 0 else zenith


def is_daytime(zenith) -> bool | np.ndarray:
    """True iff the sun is above the refraction-corrected horizon (zenith < 90.83 deg)."""
    result = np.asarray(zenith) < NIGHT_ZENITH_DEG
    return bool(result) if result.ndim == 0 else result


def eccentricity_correction(when) -> float | np.ndarray:
    """Earth-orbit eccentricity factor (Spencer Fourier series in day of year).

    Annual-periodic, within [0.96, 1.04]; ~1.035 near perihelion (early
    January) and ~0.967 near aphelion (early July).
    """
    t64 = _as_datetime64(when)
    year_start = t64.astype("datetime64[Y]").astype("datetime64[s]")
    doy_frac = (t64 - year_start) / np.timedelta64(86400, "s")
    gamma = 2.0 * np.pi * doy_frac / 365.0
    eps = (
        1.000110
        + 0.034221 * np.cos(gamma)
        + 0.001280 * np.sin(gamma)
        + 0.000719 * np.cos(2.0 * gamma)
        + 0.000077 * np.sin(2.0 * gamma)
    )
    return float(eps) if eps.ndim == 0 else eps


def extraterrestrial_irradiance(location: GeoLocation, when) -> float | np.ndarray:
    """Horizontal extraterrestrial irradiance, eps * I_s * cos(zenith), clamped at 0."""
    zenith = solar_zenith(location, when)
    eps = eccentricity_correction(when)
    value = eps * SOLAR_CONSTANT_WM2 * np.cos(np.radians(zenith))
    value = np.maximum(value, 0.0)
    return float(value) if np.ndim(value) == 0 else value


def solar_state(location: GeoLocation, when: datetime) -> SolarState:
    """Full solar geometry for one instant."""
    zenith = solar_zenith(location, when)
    eps = eccentricity_correction(when)
    irr = max(eps * SOLAR_CONSTANT_WM2 * float(np.cos(np.radians(zenith))), 0.0)
    return SolarState(
        zenith=zenith,
        eccentricity=eps,
        extraterrestrial_irradiance=irr,
        is_daytime=is_daytime(zenith),
    )
