"""solarcast: short-term solar irradiance forecasting and hyperparameter search."""

from .arima import (
    ArimaForecaster,
    ArimaModel,
    ArimaSpec,
    arima_predict_one,
    difference,
    fit_arima,
    integrate,
)
from .data_pipeline import (
    CsvSchema,
    NightPolicy,
    SplitSpec,
    TimeSeries,
    apply_night_policy,
    extraterrestrial_series,
    from_transmissivity,
    ingest_csv,
    resample_15min,
    split_train_test,
    to_transmissivity,
    write_csv,
)
from .evaluation import (
    BoxStats,
    ForecastMatrix,
    boxplot_stats,
    compare_to_reference,
    rmse_per_step,
)
from .forecast_core import (
    ForecastVector,
    Forecaster,
    PersistenceForecaster,
    SeasonalPersistenceForecaster,
    persistence_predict,
    recursive_forecast,
    recursive_forecast_matrix,
    reference_persistence_forecast,
    seasonal_persistence_predict,
)
from .nnr import (
    NnrModel,
    NnrSpec,
    ReferenceSample,
    build_reference_sample,
    find_neighbors,
    nnr_fit,
    nnr_predict_one,
)
from .search import (
    EvaluationRecord,
    HyperparameterPoint,
    SearchConfig,
    enumerate_full_grid,
    enumerate_reduced_grid,
    load_results,
    persist_results,
    reference_point,
    run_search,
    summarize,
    write_summary_csv,
)
from .solar_geometry import (
    GeoLocation,
    NIGHT_ZENITH_DEG,
    SOLAR_CONSTANT_WM2,
    SolarState,
    eccentricity_correction,
    extraterrestrial_irradiance,
    is_daytime,
    solar_state,
    solar_zenith,
)
from .synth import synthetic_irradiance

__version__ = "0.1.0"
