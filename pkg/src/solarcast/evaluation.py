"""Per-step forecast error metrics and box-plot summary statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError


@dataclass(frozen=True)
class ForecastMatrix:
    """Rolling-origin forecasts with aligned actuals and exclusion mask.

    ``night_mask`` is True where a (origin, step) pair is excluded from
    scoring: night targets, and pairs whose forecast or actual is missing
    (the constructor folds non-finite pairs in).
    """

    origins: np.ndarray  # (m,)
    forecasts: np.ndarray  # (m, J)
    actuals: np.ndarray  # (m, J)
    night_mask: np.ndarray  # (m, J) bool, True = excluded

    def __post_init__(self):
        origins = np.asarray(self.origins, dtype=np.int64)
        forecasts = np.asarray(self.forecasts, dtype=np.float64)
        actuals = np.asarray(self.actuals, dtype=np.float64)
        mask = np.asarray(self.night_mask, dtype=bool)
        if forecasts.ndim != 2:
            raise DimensionError("forecasts must be (origins, horizon)")
        if actuals.shape != forecasts.shape or mask.shape != forecasts.shape:
            raise DimensionError("forecasts, actuals, night_mask shapes must agree")
        if len(origins) != forecasts.shape[0]:
            raise DimensionError("origins length must match forecast rows")
        mask = mask | ~np.isfinite(forecasts) | ~np.isfinite(actuals)
        for arr in (origins, forecasts, actuals, mask):
            arr.flags.writeable = False
        object.__setattr__(self, "origins", origins)
        object.__setattr__(self, "forecasts", forecasts)
        object.__setattr__(self, "actuals", actuals)
        object.__setattr__(self, "night_mask", mask)

    @property
    def horizon(self) -> int:
        return self.forecasts.shape[1]


@dataclass(frozen=True)
class RmseByStep:
    """Root-mean-square error per prediction step; NaN where undefined."""

    values: np.ndarray  # (J,), NaN at undefined steps
    counts: np.ndarray  # (J,) pairs scored per step

    @property
    def defined(self) -> np.ndarray:
        return self.counts > 0

    @property
    def all_defined(self) -> bool:
        return bool(self.defined.all())


def rmse_per_step(matrix: ForecastMatrix) -> RmseByStep:
    """RMSE_j over unmasked (origin, step) pairs; steps with no pairs are undefined."""
    errors = matrix.forecasts - matrix.actuals
    include = ~matrix.night_mask
    counts = include.sum(axis=0)
    sq = np.square(np.where(include, errors, 0.0))
    with np.errstate(invalid="ignore", divide="ignore"):
        mse = sq.sum(axis=0) / counts
    values = np.sqrt(mse)
    values = np.where(counts > 0, values, np.nan)
    return RmseByStep(values=values, counts=counts.astype(np.int64))


@dataclass(frozen=True)
class BoxStats:
    """Box-plot summary: median, quartiles, whiskers, thinned outliers.

    Whiskers are the outermost occurring values within 1.5 interquartile
    ranges of the box (clamped to the box when no value falls inside the
    fence). Of the outliers only every 100th (by ascending value) is kept,
    which always retains the minimum; ``outlier_count`` is the full count.
    """

    count: int
    minimum: float
    maximum: float
    median: float
    q1: float
    q3: float
    lower_whisker: float
    upper_whisker: float
    outliers: tuple[float, ...]
    outlier_count: int


def boxplot_stats(values, thin_every: int = 100) -> BoxStats:
    """Box-plot statistics with linear-interpolation quartiles (type 7)."""
    data = np.asarray(values, dtype=np.float64)
    if data.size == 0:
        raise ValueError("boxplot_stats needs at least one value")
    if not np.isfinite(data).all():
        raise ValueError("boxplot_stats expects finite values")
    q1, median, q3 = np.percentile(data, [25.0, 50.0, 75.0])
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside_lo = data[data >= lo_fence]
    inside_hi = data[data <= hi_fence]
    lower = float(inside_lo.min()) if inside_lo.size else q1
    upper = float(inside_hi.max()) if inside_hi.size else q3
    lower = min(lower, q1)
    upper = max(upper, q3)
    outliers = np.sort(data[(data < lower) | (data > upper)])
    thinned = tuple(float(v) for v in outliers[::thin_every])
    return BoxStats(
        count=int(data.size),
        minimum=float(data.min()),
        maximum=float(data.max()),
        median=float(median),
        q1=float(q1),
        q3=float(q3),
        lower_whisker=lower,
        upper_whisker=upper,
        outliers=thinned,
        outlier_count=int(outliers.size),
    )


@dataclass(frozen=True)
class ReferenceComparison:
    """Per-step RMSE ratios of a candidate against a reference forecaster."""

    ratios: np.ndarray  # (J,), NaN where incomparable
    wins: np.ndarray  # (J,) bool, ratio < 1
    incomparable: np.ndarray  # (J,) bool: reference zero or either undefined


def compare_to_reference(candidate: np.ndarray, reference: np.ndarray) -> ReferenceComparison:
    """ratio_j = candidate_j / reference_j with win flags; zero references flagged."""
    cand = np.asarray(candidate, dtype=np.float64)
    ref = np.asarray(reference, dtype=np.float64)
    if cand.shape != ref.shape:
        raise DimensionError("candidate and reference must have equal length")
    incomparable = ~np.isfinite(cand) | ~np.isfinite(ref) | (ref == 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratios = np.where(incomparable, np.nan, cand / np.where(ref == 0.0, 1.0, ref))
    wins = np.where(incomparable, False, ratios < 1.0)
    return ReferenceComparison(ratios=ratios, wins=wins.astype(bool), incomparable=incomparable)
