"""Run configuration: a strict JSON document naming datasets and search options.

Unknown keys are rejected so typos fail loudly before any computation starts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from datetime import timedelta
from pathlib import Path

from .arima import ArimaSpec
from .data_pipeline import TimeSeries, ingest_csv, resample_15min
from .errors import ConfigError
from .nnr import NnrSpec
from .search import (
    HyperparameterPoint,
    SearchConfig,
    enumerate_full_grid,
    enumerate_reduced_grid,
)
from .solar_geometry import GeoLocation

GRID_CHOICES = ("full", "reduced", "explicit")


@dataclass(frozen=True)
class DatasetConfig:
    id: str
    path: str
    latitude: float
    longitude: float
    elevation_m: float = 0.0
    utc_offset_minutes: int = 0

    def location(self) -> GeoLocation:
        return GeoLocation(
            latitude=self.latitude,
            longitude=self.longitude,
            elevation_m=self.elevation_m,
            utc_offset_min=self.utc_offset_minutes,
        )


@dataclass(frozen=True)
class RunConfig:
    datasets: tuple[DatasetConfig, ...]
    grid: str = "reduced"
    points: tuple[dict, ...] = ()  # explicit hyperparameter points
    horizon: int = 12
    test_days: int = 7
    timeout_secs: float = 60.0
    workers: int = 1
    seed: int = 0
    out_dir: str = "."
    record_timing: bool = False

    def search_config(self) -> SearchConfig:
        return SearchConfig(
            horizon=self.horizon,
            test_days=self.test_days,
            timeout_secs=self.timeout_secs,
            workers=self.workers,
            seed=self.seed,
            record_timing=self.record_timing,
        )


def load_run_config(path) -> RunConfig:
    """Parse and fully validate a run configuration file."""
    try:
        payload = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}")
    if not isinstance(payload, dict):
        raise ConfigError("config root must be a JSON object")
    known = {f.name for f in fields(RunConfig)}
    unknown = set(payload) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    raw_datasets = payload.pop("datasets", None)
    if not raw_datasets or not isinstance(raw_datasets, list):
        raise ConfigError("config must list at least one dataset")
    datasets = []
    seen_ids = set()
    for i, item in enumerate(raw_datasets):
        if not isinstance(item, dict):
            raise ConfigError(f"datasets[{i}] must be an object")
        unknown = set(item) - {f.name for f in fields(DatasetConfig)}
        if unknown:
            raise ConfigError(f"datasets[{i}]: unknown keys {sorted(unknown)}")
        missing = {"id", "path", "latitude", "longitude"} - set(item)
        if missing:
            raise ConfigError(f"datasets[{i}]: missing keys {sorted(missing)}")
        ds = DatasetConfig(**item)
        if ds.id in seen_ids:
            raise ConfigError(f"duplicate dataset id {ds.id!r}")
        seen_ids.add(ds.id)
        ds.location()  # validates coordinates
        datasets.append(ds)
    raw_points = payload.pop("points", [])
    if not isinstance(raw_points, list):
        raise ConfigError("points must be a list")
    scalar_types = {
        "grid": str, "horizon": int, "test_days": int, "timeout_secs": (int, float),
        "workers": int, "seed": int, "out_dir": str, "record_timing": bool,
    }
    for key, expected in scalar_types.items():
        if key in payload and not isinstance(payload[key], expected):
            raise ConfigError(f"config key {key!r} has the wrong type")
    config = RunConfig(
        datasets=tuple(datasets), points=tuple(raw_points), **payload
    )
    if config.grid not in GRID_CHOICES:
        raise ConfigError(f"grid must be one of {GRID_CHOICES}, got {config.grid!r}")
    if config.grid == "explicit" and not config.points:
        raise ConfigError("grid 'explicit' requires a nonempty points list")
    if config.horizon < 1 or config.test_days < 1 or config.workers < 1:
        raise ConfigError("horizon, test_days, and workers must be >= 1")
    if config.timeout_secs <= 0:
        raise ConfigError("timeout_secs must be > 0")
    for i, point in enumerate(config.points):
        point_from_dict(point, f"points[{i}]")
    return config


_POINT_KEYS = {
    "method", "p", "d", "q", "P", "D", "Q", "s", "k", "epsilon", "weight_mode",
    "preprocessing", "night_policy", "training_days",
}


def point_from_dict(payload: dict, context: str = "point") -> HyperparameterPoint:
    """Build a HyperparameterPoint from its compact JSON form."""
    if not isinstance(payload, dict):
        raise ConfigError(f"{context}: expected an object")
    unknown = set(payload) - _POINT_KEYS
    if unknown:
        raise ConfigError(f"{context}: unknown keys {sorted(unknown)}")
    method = payload.get("method")
    data_kwargs = {
        "preprocessing": payload.get("preprocessing", "transmissivity"),
        "night_policy": payload.get("night_policy", "all_day_and_night"),
        "training_days": payload.get("training_days", 60),
    }
    try:
        if method == "persistence":
            model = None
        elif method in ("arima", "sarima"):
            model = ArimaSpec(
                p=payload.get("p", 0), d=payload.get("d", 0), q=payload.get("q", 0),
                P=payload.get("P", 0), D=payload.get("D", 0), Q=payload.get("Q", 0),
                s=payload.get("s", 96 if method == "sarima" else 0),
            )
        elif method in ("nnr", "snnr"):
            seasonal = payload.get("P", 0)
            model = NnrSpec(
                p=payload.get("p", 1), P=seasonal,
                s=payload.get("s", 96 if seasonal else 0),
                weight_mode=payload.get("weight_mode", "uniform"),
                k=payload.get("k"), epsilon=payload.get("epsilon"),
            )
        else:
            raise ConfigError(f"{context}: unknown method {method!r}")
        return HyperparameterPoint(method=method, model=model, **data_kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{context}: {exc}") from exc


def grid_from_config(config: RunConfig) -> list[HyperparameterPoint]:
    if config.grid == "full":
        return enumerate_full_grid()
    if config.grid == "reduced":
        return enumerate_reduced_grid()
    return [point_from_dict(p, f"points[{i}]") for i, p in enumerate(config.points)]


def load_dataset(ds: DatasetConfig, base_dir: Path | None = None) -> TimeSeries:
    """Ingest a dataset CSV and bring it to 15-min cadence."""
    path = Path(ds.path)
    if base_dir is not None and not path.is_absolute():
        path = base_dir / path
    if not path.exists():
        raise ConfigError(f"dataset {ds.id!r}: file not found: {path}")
    series = ingest_csv(path, ds.location())
    if series.step == timedelta(minutes=1):
        series = resample_15min(series)
    return series
