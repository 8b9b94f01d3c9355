"""Seasonal ARIMA fitting and prediction.

Fit accuracy is checked against seeded simulations whose true generating
parameters act as the oracle; the engine adapter is checked against a naive
step-by-step recursion.
"""

import numpy as np
import pytest

from solarcast.arima import (
    ArimaForecaster,
    ArimaModel,
    ArimaSpec,
    arima_predict_one,
    conditional_loglik,
    difference,
    fit_arima,
    integrate,
)
from solarcast.errors import (
    DimensionError,
    FitTimeoutError,
    InsufficientDataError,
    UnstableModelError,
)
from solarcast.forecast_core import recursive_forecast


def simulate_arma(n, phi=(), theta=(), sigma=1.0, seed=0, constant=0.0):
    """Simulate an ARMA process (paper sign convention: MA term is e_t - theta e_{t-1})."""
    rng = np.random.default_rng(seed)
    p, q = len(phi), len(theta)
    burn = 200
    e = rng.normal(0.0, sigma, n + burn)
    y = np.zeros(n + burn)
    for t in range(max(p, q), n + burn):
        ar = sum(phi[i] * y[t - 1 - i] for i in range(p))
        ma = sum(-theta[j] * e[t - 1 - j] for j in range(q))
        y[t] = constant + ar + ma + e[t]
    return y[burn:]


def naive_forecast(model, history, horizon):
    """Step-by-step ARIMA forecast oracle (no vectorization, no engine)."""
    a = model.ar_level
    m = model.ma_full
    r, h = len(a) - 1, len(m) - 1
    n = len(history)
    e = np.zeros(n)
    start = r + h  # skip warm-up; consistent with zero pre-sample residuals
    for t in range(r, n):
        pred = model.constant - sum(a[i] * history[t - i] for i in range(1, r + 1))
        pred += sum(m[j] * (e[t - j] if t - j >= r else 0.0) for j in range(1, h + 1))
        e[t] = history[t] - pred
    values = list(history)
    ehat = list(e) + [0.0] * horizon
    out = []
    for j in range(1, horizon + 1):
        t = n - 1 + j
        pred = model.constant - sum(a[i] * values[t - i] for i in range(1, r + 1))
        pred += sum(m[jj] * ehat[t - jj] for jj in range(1, h + 1))
        values.append(pred)
        out.append(pred)
    return np.array(out)


class TestDifference:
    def test_first_difference(self):
        assert difference(np.array([1.0, 3.0, 6.0]), 1, 0, 0).tolist() == [2.0, 3.0]

    def test_seasonal_difference(self):
        out = difference(np.array([1.0, 2.0, 4.0, 8.0]), 0, 1, 2)
        assert out.tolist() == [3.0, 6.0]

    def test_round_trip_all_orders(self):
        rng = np.random.default_rng(13)
        s = 96
        for d in (0, 1, 2):
            for D in (0, 1):
                n_hist = 3 * s
                x = rng.normal(0.0, 1.0, n_hist + 24)
                w = difference(x, d, D, s)
                future = w[len(w) - 24 :]
                rebuilt = integrate(future, x[:n_hist], d, D, s)
                assert np.max(np.abs(rebuilt - x[n_hist:])) < 1e-12

    def test_too_short(self):
        with pytest.raises(InsufficientDataError):
            difference(np.arange(5.0), 0, 1, 96)


class TestFitRecovery:
    def test_ar1_recovery(self):
        y = simulate_arma(10_000, phi=(0.7,), seed=101)
        model = fit_arima(y, ArimaSpec(1, 0, 0))
        assert abs(model.phi[0] - 0.7) < 0.05

    def test_ma1_recovery(self):
        y = simulate_arma(10_000, theta=(0.5,), seed=202)
        model = fit_arima(y, ArimaSpec(0, 0, 1))
        assert abs(model.theta[0] - 0.5) < 0.05

    def test_white_noise_ar_coefficient_near_zero(self):
        y = simulate_arma(10_000, seed=303)
        model = fit_arima(y, ArimaSpec(1, 0, 0))
        assert abs(model.phi[0]) < 0.05

    def test_arma11_recovery(self):
        y = simulate_arma(10_000, phi=(0.6,), theta=(0.3,), seed=404)
        model = fit_arima(y, ArimaSpec(1, 0, 1))
        assert abs(model.phi[0] - 0.6) < 0.08
        assert abs(model.theta[0] - 0.3) < 0.08

    def test_seasonal_ar_recovery(self):
        rng = np.random.default_rng(505)
        s = 24
        n = 4000
        e = rng.normal(0.0, 1.0, n)
        y = np.zeros(n)
        for t in range(s, n):
            y[t] = 0.6 * y[t - s] + e[t]
        model = fit_arima(y, ArimaSpec(0, 0, 0, P=1, s=s))
        assert abs(model.Phi[0] - 0.6) < 0.05

    def test_constant_recovery(self):
        y = simulate_arma(8_000, phi=(0.5,), constant=2.0, seed=606)
        model = fit_arima(y, ArimaSpec(1, 0, 0))
        # unconditional mean = constant / (1 - phi) = 4
        assert abs(model.constant / (1.0 - model.phi[0]) - 4.0) < 0.3

    def test_explosive_series_is_unstable(self):
        rng = np.random.default_rng(707)
        y = np.zeros(150)
        for t in range(1, 150):
            y[t] = 1.3 * y[t - 1] + rng.normal(0.0, 1.0)
        with pytest.raises(UnstableModelError):
            fit_arima(y, ArimaSpec(1, 0, 0, include_constant=False))

    def test_insufficient_data(self):
        with pytest.raises(InsufficientDataError):
            fit_arima(np.zeros(20), ArimaSpec(3, 0, 3))

    def test_timeout(self):
        y = simulate_arma(5_000, phi=(0.5, 0.2), theta=(0.3,), seed=1)
        with pytest.raises(FitTimeoutError):
            fit_arima(y, ArimaSpec(2, 0, 1), timeout_secs=0.0)

    def test_loglik_beats_random_feasible_vectors(self):
        y = simulate_arma(3_000, phi=(0.6,), theta=(0.4,), seed=808)
        spec = ArimaSpec(1, 0, 1)
        model = fit_arima(y, spec)
        rng = np.random.default_rng(909)
        for _ in range(20):
            phi = rng.uniform(-0.95, 0.95, 1)
            theta = rng.uniform(-0.95, 0.95, 1)
            constant = rng.uniform(-0.5, 0.5)
            ll = conditional_loglik(y, spec, phi, theta, (), (), constant)
            assert model.loglik >= ll - 1e-9


class TestPredictOne:
    def test_random_walk_equals_persistence(self):
        y = np.cumsum(np.random.default_rng(5).normal(size=500))
        y = y - y.min() + 1.0
        model = fit_arima(y, ArimaSpec(0, 1, 0, include_constant=False))
        value, _ = arima_predict_one(model, np.array([y[-1]]), np.empty(0))
        assert value == y[-1]

    def test_ar1_linear_recursion(self):
        model = ArimaModel(
            spec=ArimaSpec(1, 0, 0, include_constant=False),
            phi=np.array([0.5]), theta=np.empty(0), Phi=np.empty(0), Theta=np.empty(0),
            constant=0.0, sigma2=1.0, loglik=0.0, residual_tail=np.empty(0),
        )
        value, _ = arima_predict_one(model, np.array([2.0]), np.empty(0))
        assert value == 1.0

    def test_ma1_with_zero_residual_returns_constant(self):
        model = ArimaModel(
            spec=ArimaSpec(0, 0, 1),
            phi=np.empty(0), theta=np.array([0.8]), Phi=np.empty(0), Theta=np.empty(0),
            constant=0.37, sigma2=1.0, loglik=0.0, residual_tail=np.array([0.0]),
        )
        value, state = arima_predict_one(model, np.empty(0), np.array([0.0]))
        assert value == pytest.approx(0.37)
        assert state.tolist() == [0.0]

    def test_ma1_residual_state_advances_with_zero(self):
        model = ArimaModel(
            spec=ArimaSpec(0, 0, 1),
            phi=np.empty(0), theta=np.array([0.5]), Phi=np.empty(0), Theta=np.empty(0),
            constant=0.0, sigma2=1.0, loglik=0.0, residual_tail=np.array([2.0]),
        )
        value, state = arima_predict_one(model, np.empty(0), np.array([2.0]))
        assert value == pytest.approx(-1.0)  # ma_full[1] = -theta1
        assert state.tolist() == [0.0]

    def test_dimension_checks(self):
        model = ArimaModel(
            spec=ArimaSpec(1, 0, 0),
            phi=np.array([0.5]), theta=np.empty(0), Phi=np.empty(0), Theta=np.empty(0),
            constant=0.0, sigma2=1.0, loglik=0.0, residual_tail=np.empty(0),
        )
        with pytest.raises(DimensionError):
            arima_predict_one(model, np.array([1.0, 2.0]), np.empty(0))


class TestForecasterAdapter:
    @pytest.mark.parametrize(
        "spec_kwargs, gen",
        [
            ({"p": 2, "d": 0, "q": 0}, {"phi": (0.5, 0.2)}),
            ({"p": 1, "d": 0, "q": 1}, {"phi": (0.6,), "theta": (0.4,)}),
            ({"p": 1, "d": 1, "q": 1}, {"phi": (0.4,), "theta": (0.3,)}),
            ({"p": 1, "d": 0, "q": 0, "P": 1, "s": 12}, {"phi": (0.5,)}),
            ({"p": 0, "d": 0, "q": 1, "Q": 1, "s": 12}, {"theta": (0.4,)}),
        ],
    )
    def test_engine_matches_naive_recursion(self, spec_kwargs, gen):
        base = simulate_arma(1_500, seed=42, **gen)
        spec = ArimaSpec(**spec_kwargs)
        if spec.d:
            base = np.cumsum(base) / 10.0
        model = fit_arima(base, spec)
        history = base[:1_200]
        fc = recursive_forecast(ArimaForecaster(model), history, horizon=12)
        expected = naive_forecast(model, history, 12)
        assert np.max(np.abs(fc.values - expected)) < 1e-9

    def test_random_walk_persistence_over_full_horizon(self):
        rng = np.random.default_rng(6)
        y = np.cumsum(rng.normal(size=400)) + 50.0
        model = fit_arima(y, ArimaSpec(0, 1, 0, include_constant=False))
        fc = recursive_forecast(ArimaForecaster(model), y, horizon=12)
        assert np.all(fc.values == y[-1])

    def test_level_depth_precondition(self):
        y = simulate_arma(400, phi=(0.5,), seed=9)
        model = fit_arima(y, ArimaSpec(1, 0, 0))
        with pytest.raises(InsufficientDataError):
            recursive_forecast(ArimaForecaster(model), y[:0], horizon=3)


class TestSerialization:
    def test_round_trip(self):
        y = simulate_arma(2_000, phi=(0.5,), theta=(0.3,), seed=77)
        model = fit_arima(y, ArimaSpec(1, 0, 1))
        clone = ArimaModel.from_json(model.to_json())
        assert clone.spec == model.spec
        assert np.array_equal(clone.phi, model.phi)
        assert np.array_equal(clone.theta, model.theta)
        assert clone.sigma2 == model.sigma2
        fc_a = recursive_forecast(ArimaForecaster(model), y, horizon=5)
        fc_b = recursive_forecast(ArimaForecaster(clone), y, horizon=5)
        assert np.array_equal(fc_a.values, fc_b.values)


class TestSpecValidation:
    def test_seasonal_orders_require_season(self):
        with pytest.raises(ValueError):
            ArimaSpec(1, 0, 0, P=1, s=0)
        with pytest.raises(ValueError):
            ArimaSpec(1, 0, 0, s=96)

    def test_negative_orders_rejected(self):
        with pytest.raises(ValueError):
            ArimaSpec(-1, 0, 0)
