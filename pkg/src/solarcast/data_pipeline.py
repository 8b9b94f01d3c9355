"""Irradiance time-series ingestion, resampling, masking, and normalization.

Conventions:

* A sample with index ``i`` covers the interval ``[start + i*step,
  start + (i+1)*step)``; its timestamp is the interval start.
* Solar quantities attached to a sample (extraterrestrial irradiance, zenith
  for the sun-above-horizon policy) are evaluated at the interval midpoint,
  which best represents an interval average.
* Measurement gaps are carried as NaN values.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from datetime import datetime, time, timedelta, timezone

import numpy as np

from .errors import (
    CadenceError,
    CsvParseError,
    DimensionError,
    InsufficientDataError,
    OrderingError,
)
from .solar_geometry import GeoLocation, NIGHT_ZENITH_DEG, extraterrestrial_irradiance, solar_zenith

IRRADIANCE = "irradiance"
TRANSMISSIVITY = "transmissivity"

MAX_IRRADIANCE_WM2 = 1500.0
MAX_TRANSMISSIVITY = 1.5
#: Extraterrestrial irradiance below this floor counts as night for the
#: transmissivity transform (guards the division near sunrise/sunset).
TRANSMISSIVITY_IE_FLOOR_WM2 = 1.0

_ALLOWED_STEPS = (timedelta(minutes=1), timedelta(minutes=15))


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled irradiance or transmissivity observations."""

    start: datetime
    step: timedelta
    values: np.ndarray
    location: GeoLocation
    kind: str = IRRADIANCE
    zenith: np.ndarray | None = None  # per-sample zenith from the source data, if any

    def __post_init__(self):
        start = self.start
        if start.tzinfo is not None:
            start = start.astimezone(timezone.utc).replace(tzinfo=None)
        object.__setattr__(self, "start", start)
        if self.step not in _ALLOWED_STEPS:
            raise CadenceError(f"unsupported step {self.step}; expected 1 min or 15 min")
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 1 or len(values) < 1:
            raise ValueError("values must be a nonempty 1-d array")
        finite = values[np.isfinite(values)]
        if self.kind == IRRADIANCE:
            if finite.size and (finite.min() < 0.0 or finite.max() > MAX_IRRADIANCE_WM2):
                raise ValueError(f"irradiance outside [0, {MAX_IRRADIANCE_WM2}] W/m^2")
        elif self.kind == TRANSMISSIVITY:
            if finite.size and (finite.min() < 0.0 or finite.max() > MAX_TRANSMISSIVITY):
                raise ValueError(f"transmissivity outside [0, {MAX_TRANSMISSIVITY}]")
        else:
            raise ValueError(f"unknown series kind {self.kind!r}")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        if self.zenith is not None:
            zen = np.array(self.zenith, dtype=np.float64)
            if zen.shape != values.shape:
                raise DimensionError("zenith array must match values length")
            zen.flags.writeable = False
            object.__setattr__(self, "zenith", zen)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def samples_per_day(self) -> int:
        per_day = timedelta(days=1) / self.step
        return int(per_day)

    def time_at(self, index: int) -> datetime:
        return self.start + index * self.step

    def timestamps(self) -> np.ndarray:
        """Sample interval starts as datetime64[s]."""
        t0 = np.datetime64(self.start, "s")
        step_s = np.timedelta64(int(self.step.total_seconds()), "s")
        return t0 + np.arange(len(self.values)) * step_s

    def midpoints(self) -> np.ndarray:
        """Representative instants (interval midpoints) as datetime64[s]."""
        half = np.timedelta64(int(self.step.total_seconds() // 2), "s")
        return self.timestamps() + half

    def slice(self, begin: int, end: int) -> "TimeSeries":
        zen = self.zenith[begin:end] if self.zenith is not None else None
        return replace(
            self,
            start=self.time_at(begin),
            values=self.values[begin:end],
            zenith=zen,
        )


@dataclass(frozen=True)
class CsvSchema:
    """Column names of the interchange CSV format."""

    timestamp_column: str = "timestamp"
    irradiance_column: str = "ghi_wm2"
    zenith_column: str = "zenith_deg"


@dataclass(frozen=True)
class NightPolicy:
    """Which samples enter the training reference data."""

    mode: str = "all_day_and_night"  # | "clock_window" | "sun_above_horizon"
    window_start: time = time(5, 0)
    window_end: time = time(20, 0)

    MODES = ("all_day_and_night", "clock_window", "sun_above_horizon")

    def __post_init__(self):
        if self.mode not in self.MODES:
            raise ValueError(f"unknown night policy mode {self.mode!r}")
        if self.window_start >= self.window_end:
            raise ValueError("window_start must precede window_end")


@dataclass(frozen=True)
class SplitSpec:
    """Contiguous training/test split; the test window is the series tail."""

    training_days: int
    test_days: int = 7

    def __post_init__(self):
        if self.training_days < 1 or self.test_days < 1:
            raise ValueError("training_days and test_days must be >= 1")


def _parse_timestamp(text: str, line: int) -> datetime:
    try:
        dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError as exc:
        raise CsvParseError(line, f"bad timestamp {text!r}") from exc
    if dt.tzinfo is not None:
        dt = dt.astimezone(timezone.utc).replace(tzinfo=None)
    return dt


def ingest_csv(path, location: GeoLocation, schema: CsvSchema = CsvSchema()) -> TimeSeries:
    """Read a 1-min or 15-min irradiance CSV into a validated TimeSeries.

    Empty irradiance cells become NaN gaps. Non-monotone timestamps raise
    OrderingError; inconsistent sampling intervals raise CadenceError.
    """
    timestamps: list[datetime] = []
    values: list[float] = []
    zeniths: list[float] = []
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvParseError(1, "empty file")
        header = [column.strip() for column in header]
        try:
            ts_idx = header.index(schema.timestamp_column)
            irr_idx = header.index(schema.irradiance_column)
        except ValueError:
            raise CsvParseError(
                1,
                f"header must contain {schema.timestamp_column!r} and "
                f"{schema.irradiance_column!r}, got {header}",
            )
        zen_idx = header.index(schema.zenith_column) if schema.zenith_column in header else None

        for line, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) <= max(ts_idx, irr_idx):
                raise CsvParseError(line, f"expected >= {max(ts_idx, irr_idx) + 1} columns")
            timestamps.append(_parse_timestamp(row[ts_idx].strip(), line))
            cell = row[irr_idx].strip()
            if cell == "":
                values.append(math.nan)
            else:
                try:
                    values.append(float(cell))
                except ValueError as exc:
                    raise CsvParseError(line, f"bad irradiance value {cell!r}") from exc
            if zen_idx is not None:
                zcell = row[zen_idx].strip() if len(row) > zen_idx else ""
                zeniths.append(float(zcell) if zcell else math.nan)

    if not timestamps:
        raise CsvParseError(2, "no data rows")
    for i in range(1, len(timestamps)):
        if timestamps[i] <= timestamps[i - 1]:
            raise OrderingError(
                f"timestamps not strictly increasing at row {i + 2} ({timestamps[i]})"
            )
    step = timestamps[1] - timestamps[0] if len(timestamps) > 1 else timedelta(minutes=1)
    for i in range(1, len(timestamps)):
        if timestamps[i] - timestamps[i - 1] != step:
            raise CadenceError(f"sampling interval changes at row {i + 2}")
    if step not in _ALLOWED_STEPS:
        raise CadenceError(f"unsupported cadence {step}; expected 1 min or 15 min")

    return TimeSeries(
        start=timestamps[0],
        step=step,
        values=np.array(values),
        location=location,
        kind=IRRADIANCE,
        zenith=np.array(zeniths) if zeniths else None,
    )


def write_csv(series: TimeSeries, path, schema: CsvSchema = CsvSchema()) -> None:
    """Write a series in the interchange CSV format (NaN gaps as empty cells)."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        header = [schema.timestamp_column, schema.irradiance_column]
        if series.zenith is not None:
            header.append(schema.zenith_column)
        writer.writerow(header)
        stamps = series.timestamps()
        for i, value in enumerate(series.values):
            row = [
                np.datetime_as_string(stamps[i], unit="s") + "Z",
                "" if math.isnan(value) else repr(float(value)),
            ]
            if series.zenith is not None:
                zen = series.zenith[i]
                row.append("" if math.isnan(zen) else repr(float(zen)))
            writer.writerow(row)


def _fill_short_gaps(values: np.ndarray, max_gap: int = 2) -> np.ndarray:
    """Linearly interpolate NaN runs of length <= max_gap with valid neighbors."""
    out = values.copy()
    isnan = np.isnan(out)
    if not isnan.any():
        return out
    n = len(out)
    idx = np.arange(n)
    run_start = None
    for i in range(n + 1):
        if i < n and isnan[i]:
            if run_start is None:
                run_start = i
        elif run_start is not None:
            run_len = i - run_start
            if run_len <= max_gap and run_start > 0 and i < n:
                left, right = run_start - 1, i
                out[run_start:i] = np.interp(
                    idx[run_start:i], [left, right], [out[left], out[right]]
                )
            run_start = None
    return out


def resample_15min(series: TimeSeries) -> TimeSeries:
    """Average a 1-min series into quarter-hour blocks aligned to the clock.

    Gaps of at most 2 source samples are linearly interpolated; blocks still
    containing gaps afterwards are marked invalid (NaN).
    """
    if series.step != timedelta(minutes=1):
        raise CadenceError("resample_15min expects a 1-min series")
    offset = (series.start.minute % 15) * 60 + series.start.second
    head = 0 if offset == 0 else (15 * 60 - offset) // 60
    usable = len(series.values) - head
    blocks = usable // 15
    if blocks < 1:
        raise InsufficientDataError("series too short for one aligned 15-min block")
    trimmed = _fill_short_gaps(series.values[head : head + blocks * 15])
    means = trimmed.reshape(blocks, 15).mean(axis=1)
    zen = None
    if series.zenith is not None:
        zen = series.zenith[head : head + blocks * 15].reshape(blocks, 15).mean(axis=1)
    return TimeSeries(
        start=series.time_at(head),
        step=timedelta(minutes=15),
        values=means,
        location=series.location,
        kind=series.kind,
        zenith=zen,
    )


def sample_zenith(series: TimeSeries) -> np.ndarray:
    """Per-sample zenith angle: the source data's column when present, else computed."""
    if series.zenith is not None and not np.isnan(series.zenith).any():
        return series.zenith
    return solar_zenith(series.location, series.midpoints())


def apply_night_policy(series: TimeSeries, policy: NightPolicy) -> np.ndarray:
    """Inclusion mask (True = usable as training reference data).

    The mask never reorders or rescales values. Local time uses the
    location's fixed UTC offset.
    """
    n = len(series.values)
    if policy.mode == "all_day_and_night":
        return np.ones(n, dtype=bool)
    if policy.mode == "clock_window":
        local = series.timestamps() + np.timedelta64(series.location.utc_offset_min * 60, "s")
        seconds = (local - local.astype("datetime64[D]")).astype(np.float64)
        lo = policy.window_start.hour * 3600 + policy.window_start.minute * 60
        hi = policy.window_end.hour * 3600 + policy.window_end.minute * 60
        return (seconds >= lo) & (seconds < hi)
    return sample_zenith(series) < NIGHT_ZENITH_DEG


def extraterrestrial_series(series: TimeSeries) -> np.ndarray:
    """Extraterrestrial irradiance at each sample's representative instant."""
    return extraterrestrial_irradiance(series.location, series.midpoints())


def to_transmissivity(series: TimeSeries, extraterrestrial: np.ndarray | None = None) -> TimeSeries:
    """Normalize irradiance by extraterrestrial irradiance.

    Samples with extraterrestrial irradiance below 1 W/m^2 (night) map to 0;
    results are clamped to [0, 1.5]; gaps stay gaps.
    """
    if series.kind != IRRADIANCE:
        raise ValueError("to_transmissivity expects an irradiance series")
    ie = extraterrestrial_series(series) if extraterrestrial is None else extraterrestrial
    if len(ie) != len(series.values):
        raise DimensionError("extraterrestrial array must match series length")
    day = ie >= TRANSMISSIVITY_IE_FLOOR_WM2
    tau = np.where(day, series.values / np.where(day, ie, 1.0), 0.0)
    tau = np.clip(tau, 0.0, MAX_TRANSMISSIVITY)
    tau = np.where(np.isnan(series.values), np.nan, tau)
    return replace(series, kind=TRANSMISSIVITY, values=tau)


def from_transmissivity(tau_forecast: np.ndarray, extraterrestrial: np.ndarray) -> np.ndarray:
    """Irradiance forecast from a transmissivity forecast: tau * I_e, clamped at 0.

    Works elementwise on arrays of any matching shape.
    """
    tau = np.asarray(tau_forecast, dtype=np.float64)
    ie = np.asarray(extraterrestrial, dtype=np.float64)
    if tau.shape != ie.shape:
        raise DimensionError(f"shape mismatch: {tau.shape} vs {ie.shape}")
    return np.maximum(tau * ie, 0.0)


def split_train_test(series: TimeSeries, spec: SplitSpec) -> tuple[TimeSeries, TimeSeries]:
    """Contiguous split with the test window at the series tail.

    The training window is the ``training_days`` immediately preceding the
    test window, so every training size is evaluated against the same test
    data.
    """
    per_day = series.samples_per_day
    n_train = spec.training_days * per_day
    n_test = spec.test_days * per_day
    if len(series.values) < n_train + n_test:
        raise InsufficientDataError(
            f"need {n_train + n_test} samples for split "
            f"({spec.training_days}+{spec.test_days} days), have {len(series.values)}"
        )
    test_begin = len(series.values) - n_test
    return series.slice(test_begin - n_train, test_begin), series.slice(
        test_begin, len(series.values)
    )
