"""Hyperparameter search: grid enumeration, sweep execution, persistence.

The full grid crosses every model structure from the method tables with the
admissible data hyperparameters (preprocessing, night policy, training
days); the reduced grid is the seasonal nearest-neighbor subspace that the
analysis singles out. ``run_search`` trains and tests every (dataset, point)
combination with a rolling forecast origin and no refitting, captures
per-point failures as record statuses, and produces canonically sorted,
schedule-independent results.

BLAS threading is pinned to one thread inside every task so results are
bitwise identical for any worker count.
"""

from __future__ import annotations

import csv
import time as _time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from .arima import ArimaForecaster, ArimaSpec, fit_arima
from .data_pipeline import (
    NightPolicy,
    TimeSeries,
    apply_night_policy,
    from_transmissivity,
    sample_zenith,
    to_transmissivity,
)
from .errors import (
    CsvParseError,
    FitTimeoutError,
    InsufficientDataError,
    UnstableModelError,
)
from .evaluation import BoxStats, ForecastMatrix, boxplot_stats, rmse_per_step
from .forecast_core import PersistenceForecaster, recursive_forecast_matrix
from .nnr import NnrSpec, nnr_fit
from .solar_geometry import NIGHT_ZENITH_DEG, SOLAR_CONSTANT_WM2, extraterrestrial_irradiance

HORIZON = 12
SAMPLES_PER_DAY = 96
SEASON_STEPS = 96  # one day at 15-min sampling

METHODS = ("persistence", "arima", "sarima", "nnr", "snnr")
SEASONAL_METHODS = ("sarima", "snnr")
PREPROCESSINGS = ("irradiance", "transmissivity")
NIGHT_POLICIES = ("all_day_and_night", "clock_window", "sun_above_horizon")
TRAINING_DAYS = (1, 3, 7, 14, 21, 30, 60)
SEASONAL_TRAINING_DAYS = (14, 21, 30, 60)
EPSILON_GRID = (0.01, 0.05, 0.1, 0.5, 1.0)

STATUS_OK = "ok"
STATUSES = ("ok", "unstable_model", "training_timeout", "empty_neighborhood",
            "insufficient_data")


@dataclass(frozen=True)
class HyperparameterPoint:
    """One fully specified (method, model structure, data treatment) choice."""

    method: str
    model: ArimaSpec | NnrSpec | None
    preprocessing: str
    night_policy: str
    training_days: int

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.preprocessing not in PREPROCESSINGS:
            raise ValueError(f"unknown preprocessing {self.preprocessing!r}")
        if self.night_policy not in NIGHT_POLICIES:
            raise ValueError(f"unknown night policy {self.night_policy!r}")
        if self.training_days < 1:
            raise ValueError("training_days must be >= 1")
        seasonal_model = (
            isinstance(self.model, NnrSpec) and self.model.P > 0
        ) or (isinstance(self.model, ArimaSpec) and self.model.s > 0)
        if self.method in SEASONAL_METHODS or seasonal_model:
            if self.training_days < 14:
                raise ValueError("seasonal methods need at least 14 training days")
            if self.night_policy == "sun_above_horizon":
                raise ValueError(
                    "sun_above_horizon is unsupported for seasonal methods "
                    "(variable day length)"
                )


@dataclass(frozen=True)
class EvaluationRecord:
    """Outcome of one (dataset, hyperparameter point) evaluation."""

    dataset_id: str
    ordinal: int
    point: HyperparameterPoint
    status: str
    fit_seconds: float
    n_origins: int
    rmse: tuple  # 12 floats or None where undefined

    def rmse_at(self, step: int) -> float | None:
        return self.rmse[step - 1]


@dataclass(frozen=True)
class SearchConfig:
    horizon: int = HORIZON
    test_days: int = 7
    timeout_secs: float = 60.0
    workers: int = 1
    seed: int = 0
    #: Record wall-clock fit times (0.1 s resolution). Off by default so the
    #: result table is bitwise reproducible run to run.
    record_timing: bool = False


# -- grid enumeration ---------------------------------------------------------


def arima_model_structures() -> list[ArimaSpec]:
    """Table of ARIMA structures: p 0..10, d 0..2, q 0..10 (363 total)."""
    return [
        ArimaSpec(p=p, d=d, q=q)
        for p in range(11)
        for d in range(3)
        for q in range(11)
    ]


def sarima_model_structures() -> list[ArimaSpec]:
    """SARIMA structures: p,q in {0,1,3}; P,Q 0..3; d,D in {0,1} (576 total)."""
    structures = []
    for p in (0, 1, 3):
        for d in (0, 1):
            for q in (0, 1, 3):
                for P in range(4):
                    for D in (0, 1):
                        for Q in range(4):
                            s = SEASON_STEPS if (P or D or Q) else 0
                            structures.append(
                                ArimaSpec(p=p, d=d, q=q, P=P, D=D, Q=Q, s=s)
                            )
    return structures


def _nnr_neighborhoods() -> list[dict]:
    choices: list[dict] = [{"k": k} for k in range(1, 21)]
    choices += [{"epsilon": eps} for eps in EPSILON_GRID]
    return choices


def nnr_model_structures() -> list[NnrSpec]:
    """NNR structures: p 1..20, both weights, k 1..20 or epsilon grid (1000)."""
    return [
        NnrSpec(p=p, weight_mode=weight, **neighborhood)
        for p in range(1, 21)
        for weight in ("uniform", "inverse_distance")
        for neighborhood in _nnr_neighborhoods()
    ]


def snnr_model_structures() -> list[NnrSpec]:
    """Seasonal NNR structures: p 1..11, P 1..7, both weights, k or epsilon (3850)."""
    return [
        NnrSpec(p=p, P=P, s=SEASON_STEPS, weight_mode=weight, **neighborhood)
        for p in range(1, 12)
        for P in range(1, 8)
        for weight in ("uniform", "inverse_distance")
        for neighborhood in _nnr_neighborhoods()
    ]


def _data_combos(seasonal: bool) -> list[tuple[str, str, int]]:
    nights = ("all_day_and_night", "clock_window") if seasonal else NIGHT_POLICIES
    days = SEASONAL_TRAINING_DAYS if seasonal else TRAINING_DAYS
    return [
        (prep, night, d) for prep in PREPROCESSINGS for night in nights for d in days
    ]


def enumerate_full_grid() -> list[HyperparameterPoint]:
    """Every admissible (method, structure, data treatment) combination.

    Data hyperparameters cross by method family: the seasonal families keep
    at least 14 training days and never use the sun-above-horizon policy.
    The persistence baselines carry one data treatment per preprocessing
    (their forecasts do not depend on the training window).
    """
    points: list[HyperparameterPoint] = []
    for prep in PREPROCESSINGS:
        points.append(
            HyperparameterPoint("persistence", None, prep, "all_day_and_night", 1)
        )
    for structure in arima_model_structures():
        for prep, night, days in _data_combos(seasonal=False):
            points.append(HyperparameterPoint("arima", structure, prep, night, days))
    for structure in nnr_model_structures():
        for prep, night, days in _data_combos(seasonal=False):
            points.append(HyperparameterPoint("nnr", structure, prep, night, days))
    for structure in sarima_model_structures():
        for prep, night, days in _data_combos(seasonal=True):
            points.append(HyperparameterPoint("sarima", structure, prep, night, days))
    for structure in snnr_model_structures():
        for prep, night, days in _data_combos(seasonal=True):
            points.append(HyperparameterPoint("snnr", structure, prep, night, days))
    return points


def enumerate_reduced_grid() -> list[HyperparameterPoint]:
    """The reduced search space: seasonal NNR on transmissivity, night data
    included, 60-day reference sample, uniform weights, fixed k.

    p 1..11 x P 1..7 x k 10..20 = 847 points.
    """
    return [
        HyperparameterPoint(
            "snnr",
            NnrSpec(p=p, P=P, s=SEASON_STEPS, weight_mode="uniform", k=k),
            "transmissivity",
            "all_day_and_night",
            60,
        )
        for p in range(1, 12)
        for P in range(1, 8)
        for k in range(10, 21)
    ]


def reference_point() -> HyperparameterPoint:
    """Persistence on transmissivity: the benchmark every model is judged against."""
    return HyperparameterPoint("persistence", None, "transmissivity",
                               "all_day_and_night", 1)


# -- dataset preparation ------------------------------------------------------


@dataclass(frozen=True)
class PreparedDataset:
    """Per-dataset arrays shared by every evaluation task."""

    dataset_id: str
    irradiance: np.ndarray  # (n,) W/m^2, NaN gaps
    transmissivity: np.ndarray  # (n,)
    extraterrestrial: np.ndarray  # (n + horizon,) at sample midpoints
    daytime: np.ndarray  # (n,) bool
    masks: Mapping[str, np.ndarray]  # night-policy inclusion masks
    test_begin: int


def prepare_dataset(
    dataset_id: str, series: TimeSeries, config: SearchConfig
) -> PreparedDataset:
    if series.step.total_seconds() != 15 * 60:
        raise ValueError("search expects 15-min series (run the resampler first)")
    n = len(series.values)
    n_test = config.test_days * SAMPLES_PER_DAY
    if n <= n_test:
        raise InsufficientDataError("series shorter than the test window")
    step_s = np.timedelta64(int(series.step.total_seconds()), "s")
    mids = np.datetime64(series.start, "s") + np.arange(n + config.horizon) * step_s + step_s // 2
    ie = extraterrestrial_irradiance(series.location, mids)
    tau = to_transmissivity(series, extraterrestrial=ie[:n]).values
    daytime = sample_zenith(series) < NIGHT_ZENITH_DEG
    masks = {
        mode: apply_night_policy(series, NightPolicy(mode)) for mode in NIGHT_POLICIES
    }
    return PreparedDataset(
        dataset_id=dataset_id,
        irradiance=series.values,
        transmissivity=tau,
        extraterrestrial=ie,
        daytime=daytime,
        masks=masks,
        test_begin=n - n_test,
    )


# -- single-point evaluation --------------------------------------------------


def _fit_model(train_values, train_mask, point: HyperparameterPoint, config: SearchConfig):
    if point.method == "persistence":
        return PersistenceForecaster()
    if point.method in ("arima", "sarima"):
        usable = train_values[train_mask & np.isfinite(train_values)]
        return ArimaForecaster(
            fit_arima(usable, point.model, timeout_secs=config.timeout_secs)
        )
    spec = point.model
    if spec.epsilon is not None and point.preprocessing == "irradiance":
        # distance thresholds are stated in transmissivity units
        spec = NnrSpec(
            p=spec.p, P=spec.P, s=spec.s, weight_mode=spec.weight_mode,
            epsilon=spec.epsilon * SOLAR_CONSTANT_WM2, search_mode=spec.search_mode,
            literal_inverse_sum=spec.literal_inverse_sum,
        )
    return nnr_fit(train_values, spec, train_mask)


def evaluate_point(
    prepared: PreparedDataset,
    point: HyperparameterPoint,
    ordinal: int,
    config: SearchConfig,
) -> EvaluationRecord:
    """Train once, forecast from every unmasked test origin, score with night
    exclusion. Failures become record statuses rather than exceptions."""
    horizon = config.horizon
    n = len(prepared.irradiance)
    test_begin = prepared.test_begin
    train_begin = test_begin - point.training_days * SAMPLES_PER_DAY

    def failed(status: str, fit_seconds: float = 0.0) -> EvaluationRecord:
        return EvaluationRecord(
            dataset_id=prepared.dataset_id, ordinal=ordinal, point=point,
            status=status, fit_seconds=fit_seconds, n_origins=0,
            rmse=tuple([None] * horizon),
        )

    if train_begin < 0:
        return failed("insufficient_data")

    units = (
        prepared.transmissivity
        if point.preprocessing == "transmissivity"
        else prepared.irradiance
    )
    train_values = units[train_begin:test_begin]
    train_mask = prepared.masks[point.night_policy][train_begin:test_begin]

    started = _time.perf_counter()

    def elapsed() -> float:
        return _round_fit(started) if config.record_timing else 0.0

    try:
        model = _fit_model(train_values, train_mask, point, config)
    except UnstableModelError:
        return failed("unstable_model", elapsed())
    except FitTimeoutError:
        return failed("training_timeout", elapsed())
    except InsufficientDataError:
        return failed("insufficient_data", elapsed())
    fit_seconds = elapsed()

    history = units[train_begin:n]
    valid_origin = prepared.daytime & np.isfinite(prepared.irradiance)
    offsets = model.required_lags()
    deepest = int(-offsets.min()) if offsets.size else 0
    origins = np.nonzero(valid_origin[test_begin:])[0] + test_begin
    origins = origins[origins - train_begin >= deepest]
    if origins.size == 0:
        return failed("insufficient_data", fit_seconds)

    preds = recursive_forecast_matrix(model, history, origins - train_begin, horizon)

    target_idx = origins[:, None] + np.arange(1, horizon + 1)[None, :]
    in_range = target_idx < n
    clipped = np.minimum(target_idx, n - 1)
    if point.preprocessing == "transmissivity":
        forecasts = from_transmissivity(preds, prepared.extraterrestrial[target_idx])
    else:
        forecasts = preds
    actuals = np.where(in_range, prepared.irradiance[clipped], np.nan)
    night = ~(in_range & prepared.daytime[clipped])

    matrix = ForecastMatrix(
        origins=origins, forecasts=forecasts, actuals=actuals, night_mask=night
    )
    rmse = rmse_per_step(matrix)
    if rmse.all_defined:
        status = STATUS_OK
    elif (
        point.method in ("nnr", "snnr")
        and point.model.epsilon is not None
        and not np.isfinite(preds).all()
    ):
        status = "empty_neighborhood"
    else:
        status = "insufficient_data"
    values = tuple(
        float(v) if c > 0 else None for v, c in zip(rmse.values, rmse.counts)
    )
    return EvaluationRecord(
        dataset_id=prepared.dataset_id, ordinal=ordinal, point=point, status=status,
        fit_seconds=fit_seconds, n_origins=int(origins.size), rmse=values,
    )


def _round_fit(started: float) -> float:
    return round(_time.perf_counter() - started, 1)


# -- sweep driver -------------------------------------------------------------

_WORKER_STATE: dict = {}


def _set_worker_state(prepared_list, grid, config):
    _WORKER_STATE["prepared"] = prepared_list
    _WORKER_STATE["grid"] = grid
    _WORKER_STATE["config"] = config


def _worker_init(prepared_list, grid, config):
    _set_worker_state(prepared_list, grid, config)
    # one BLAS thread per task for bitwise-identical results at any worker
    # count; the controller is kept alive for the worker process lifetime
    _WORKER_STATE["blas_limit"] = threadpool_limits(limits=1)


def _worker_task(task: tuple[int, int]) -> tuple[int, int, EvaluationRecord]:
    dataset_idx, ordinal = task
    prepared = _WORKER_STATE["prepared"][dataset_idx]
    point = _WORKER_STATE["grid"][ordinal]
    config = _WORKER_STATE["config"]
    return dataset_idx, ordinal, evaluate_point(prepared, point, ordinal, config)


def run_search(
    datasets: Mapping[str, TimeSeries],
    grid: Sequence[HyperparameterPoint],
    config: SearchConfig = SearchConfig(),
    progress=None,
) -> list[EvaluationRecord]:
    """Evaluate every grid point on every dataset.

    Returns one record per (dataset, point) pair, sorted by (dataset id,
    method, point ordinal). Output is identical for any worker count.
    """
    grid = list(grid)
    prepared_list = [
        prepare_dataset(dataset_id, series, config)
        for dataset_id, series in sorted(datasets.items())
    ]
    tasks = [
        (dataset_idx, ordinal)
        for dataset_idx in range(len(prepared_list))
        for ordinal in range(len(grid))
    ]
    records: list[EvaluationRecord] = []
    if config.workers <= 1:
        _set_worker_state(prepared_list, grid, config)
        with threadpool_limits(limits=1):
            for done, task in enumerate(tasks, start=1):
                records.append(_worker_task(task)[2])
                if progress is not None:
                    progress(done, len(tasks))
    else:
        with ProcessPoolExecutor(
            max_workers=config.workers,
            initializer=_worker_init,
            initargs=(prepared_list, grid, config),
        ) as pool:
            chunk = max(1, len(tasks) // (config.workers * 8))
            for done, (_, _, record) in enumerate(
                pool.map(_worker_task, tasks, chunksize=chunk), start=1
            ):
                records.append(record)
                if progress is not None:
                    progress(done, len(tasks))
    records.sort(key=lambda r: (r.dataset_id, r.point.method, r.ordinal))
    return records


# -- persistence --------------------------------------------------------------

RESULT_COLUMNS = (
    "dataset_id", "method", "p", "d", "q", "P_seas", "D_seas", "Q_seas", "season",
    "weight_mode", "neighborhood_mode", "k", "epsilon", "preprocessing",
    "night_policy", "training_days", "status", "fit_seconds", "m",
) + tuple(f"rmse_{j:02d}" for j in range(1, HORIZON + 1))


def _point_columns(point: HyperparameterPoint) -> dict[str, str]:
    cols = dict.fromkeys(RESULT_COLUMNS[2:13], "")
    model = point.model
    if isinstance(model, ArimaSpec):
        cols.update(
            p=str(model.p), d=str(model.d), q=str(model.q),
            P_seas=str(model.P), D_seas=str(model.D), Q_seas=str(model.Q),
            season=str(model.s),
        )
    elif isinstance(model, NnrSpec):
        cols.update(p=str(model.p), P_seas=str(model.P), season=str(model.s),
                    weight_mode=model.weight_mode)
        if model.k is not None:
            cols.update(neighborhood_mode="fixed_k", k=str(model.k))
        else:
            cols.update(neighborhood_mode="max_distance", epsilon=repr(model.epsilon))
    return cols


def persist_results(records: Iterable[EvaluationRecord], path) -> None:
    """Write records to CSV (lossless: floats as shortest round-trip reprs)."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(RESULT_COLUMNS)
        for record in records:
            cols = _point_columns(record.point)
            row = [
                record.dataset_id, record.point.method,
                cols["p"], cols["d"], cols["q"], cols["P_seas"], cols["D_seas"],
                cols["Q_seas"], cols["season"], cols["weight_mode"],
                cols["neighborhood_mode"], cols["k"], cols["epsilon"],
                record.point.preprocessing, record.point.night_policy,
                str(record.point.training_days), record.status,
                repr(record.fit_seconds), str(record.n_origins),
            ]
            row += ["" if v is None else repr(v) for v in record.rmse]
            writer.writerow(row)


def _parse_point(row: dict[str, str], line: int) -> HyperparameterPoint:
    method = row["method"]
    try:
        if method == "persistence":
            model = None
        elif method in ("arima", "sarima"):
            model = ArimaSpec(
                p=int(row["p"]), d=int(row["d"]), q=int(row["q"]),
                P=int(row["P_seas"]), D=int(row["D_seas"]), Q=int(row["Q_seas"]),
                s=int(row["season"]),
            )
        elif method in ("nnr", "snnr"):
            model = NnrSpec(
                p=int(row["p"]), P=int(row["P_seas"]), s=int(row["season"]),
                weight_mode=row["weight_mode"],
                k=int(row["k"]) if row["k"] else None,
                epsilon=float(row["epsilon"]) if row["epsilon"] else None,
            )
        else:
            raise ValueError(f"unknown method {method!r}")
        return HyperparameterPoint(
            method=method, model=model, preprocessing=row["preprocessing"],
            night_policy=row["night_policy"], training_days=int(row["training_days"]),
        )
    except (KeyError, ValueError) as exc:
        raise CsvParseError(line, f"bad hyperparameter columns: {exc}") from exc


def load_results(path) -> list[EvaluationRecord]:
    """Read records back; raises CsvParseError with the offending row number."""
    records: list[EvaluationRecord] = []
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvParseError(1, "empty results file")
        if tuple(header) != RESULT_COLUMNS:
            raise CsvParseError(1, "unexpected results header")
        for line, raw in enumerate(reader, start=2):
            if len(raw) != len(RESULT_COLUMNS):
                raise CsvParseError(line, f"expected {len(RESULT_COLUMNS)} columns, "
                                          f"got {len(raw)}")
            row = dict(zip(RESULT_COLUMNS, raw))
            if row["status"] not in STATUSES:
                raise CsvParseError(line, f"unknown status {row['status']!r}")
            try:
                rmse = tuple(
                    float(row[f"rmse_{j:02d}"]) if row[f"rmse_{j:02d}"] else None
                    for j in range(1, HORIZON + 1)
                )
                record = EvaluationRecord(
                    dataset_id=row["dataset_id"],
                    ordinal=len(records),
                    point=_parse_point(row, line),
                    status=row["status"],
                    fit_seconds=float(row["fit_seconds"]),
                    n_origins=int(row["m"]),
                    rmse=rmse,
                )
            except ValueError as exc:
                raise CsvParseError(line, str(exc)) from exc
            records.append(record)
    return records


# -- summaries ----------------------------------------------------------------


def _group_key(record: EvaluationRecord, dimension: str):
    point = record.point
    model = point.model
    if dimension == "method":
        return point.method
    if dimension == "preprocessing":
        return point.preprocessing
    if dimension == "night_policy":
        return point.night_policy
    if dimension == "training_days":
        return point.training_days
    if dimension == "weight_mode":
        return model.weight_mode if isinstance(model, NnrSpec) else None
    if dimension == "neighborhood_mode":
        if isinstance(model, NnrSpec):
            return "fixed_k" if model.k is not None else "max_distance"
        return None
    if dimension == "k":
        return model.k if isinstance(model, NnrSpec) else None
    if dimension == "epsilon":
        return model.epsilon if isinstance(model, NnrSpec) else None
    if dimension == "p":
        return getattr(model, "p", None)
    if dimension == "P":
        return getattr(model, "P", None)
    raise ValueError(f"unknown grouping dimension {dimension!r}")


@dataclass(frozen=True)
class SummaryRow:
    group_key: str
    step: int
    stats: BoxStats


def summarize(
    records: Iterable[EvaluationRecord],
    group_by: str,
    steps: Sequence[int] = (1, 4, 12),
) -> list[SummaryRow]:
    """BoxStats of RMSE_j per group; failed records never enter statistics."""
    groups: dict[object, list[EvaluationRecord]] = {}
    for record in records:
        if record.status != STATUS_OK:
            continue
        key = _group_key(record, group_by)
        if key is None:
            continue
        groups.setdefault(key, []).append(record)
    rows: list[SummaryRow] = []
    for key in sorted(groups, key=str):
        for step in steps:
            values = [r.rmse_at(step) for r in groups[key]]
            values = [v for v in values if v is not None]
            if not values:
                continue
            rows.append(SummaryRow(group_key=str(key), step=step,
                                   stats=boxplot_stats(values)))
    return rows


SUMMARY_COLUMNS = (
    "group_key", "step_j", "count", "min", "q1", "median", "q3",
    "lower_whisker", "upper_whisker", "outlier_count",
)


def write_summary_csv(rows: Iterable[SummaryRow], path) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(SUMMARY_COLUMNS)
        for row in rows:
            s = row.stats
            writer.writerow([
                row.group_key, str(row.step), str(s.count), repr(s.minimum),
                repr(s.q1), repr(s.median), repr(s.q3), repr(s.lower_whisker),
                repr(s.upper_whisker), str(s.outlier_count),
            ])
