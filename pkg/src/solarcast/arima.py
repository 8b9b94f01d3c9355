"""Seasonal ARIMA: specification, CSS maximum-likelihood fitting, prediction.

Model form (backwards-shift operator B, differencing operators nabla):

    phi(B) PHI(B^s) (1-B)^d (1-B^s)^D y_t = theta0 + theta(B) THETA(B^s) e_t

with phi(B) = 1 - phi_1 B - ... - phi_p B^p and likewise for the other
polynomial factors. Estimation maximizes the Gaussian likelihood built from
conditional-sum-of-squares residuals (pre-sample residuals zero), with
parameters optimized through a partial-autocorrelation reparameterization
that enforces stationarity and invertibility of every factor. Multi-step
prediction sets unknown future shocks to zero.

The seasonal and non-seasonal factors are expanded into a single lag
polynomial on the undifferenced series at fit time, so one-step prediction
is a dot product over level lags plus a decaying moving-average correction.
"""

from __future__ import annotations

import json
import time as _time
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import optimize
from scipy.signal import lfilter

from .errors import (
    DimensionError,
    FitTimeoutError,
    InsufficientDataError,
    UnstableModelError,
)
from .forecast_core import Forecaster

#: Fitted polynomial roots must stay at least this far outside the unit circle.
ROOT_MARGIN = 1.001


@dataclass(frozen=True)
class ArimaSpec:
    """Orders of one (seasonal) ARIMA model structure."""

    p: int
    d: int
    q: int
    P: int = 0
    D: int = 0
    Q: int = 0
    s: int = 0
    include_constant: bool = True

    def __post_init__(self):
        for name in ("p", "d", "q", "P", "D", "Q", "s"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        seasonal = self.P > 0 or self.D > 0 or self.Q > 0
        if seasonal != (self.s > 0):
            raise ValueError("s must be > 0 exactly when a seasonal order is > 0")

    @property
    def n_params(self) -> int:
        return self.p + self.q + self.P + self.Q + (1 if self.include_constant else 0)

    @property
    def min_training_length(self) -> int:
        return 10 * (self.p + self.q + self.P + self.Q + 1) + self.d + self.D * self.s


def difference(values: np.ndarray, d: int, D: int, s: int) -> np.ndarray:
    """Apply seasonal differencing D times, then plain differencing d times."""
    w = np.asarray(values, dtype=np.float64)
    if len(w) <= d + D * s:
        raise InsufficientDataError(
            f"need more than {d + D * s} values to difference (d={d}, D={D}, s={s})"
        )
    for _ in range(D):
        w = w[s:] - w[:-s]
    for _ in range(d):
        w = w[1:] - w[:-1]
    return w


def integrate(
    diff_forecasts: np.ndarray, history: np.ndarray, d: int, D: int, s: int
) -> np.ndarray:
    """Invert ``difference``: turn differenced forecasts back into levels.

    ``history`` must hold the undifferenced values up to the forecast origin;
    exact left inverse of ``difference`` for any (d, D, s).
    """
    history = np.asarray(history, dtype=np.float64)
    if len(history) < d + D * s:
        raise InsufficientDataError("history too short to integrate forecasts")
    levels = [history]
    kinds: list[str] = []
    for _ in range(D):
        levels.append(levels[-1][s:] - levels[-1][:-s])
        kinds.append("seasonal")
    for _ in range(d):
        levels.append(levels[-1][1:] - levels[-1][:-1])
        kinds.append("plain")
    current = np.asarray(diff_forecasts, dtype=np.float64)
    for level_idx in reversed(range(len(kinds))):
        base = levels[level_idx]
        if kinds[level_idx] == "plain":
            current = np.cumsum(current) + base[-1]
        else:
            out = np.empty_like(current)
            for i in range(len(current)):
                prev = out[i - s] if i >= s else base[len(base) + i - s]
                out[i] = current[i] + prev
            current = out
    return current


# -- stationarity-enforcing reparameterization ------------------------------


def _pacf_to_coeffs(raw: np.ndarray) -> np.ndarray:
    """Map unconstrained reals to coefficients of a stationary polynomial
    1 - c_1 B - ... - c_k B^k via partial autocorrelations (Durbin-Levinson)."""
    pacf = np.tanh(raw / 2.0)
    coeffs = pacf.copy()
    work = pacf.copy()
    for j in range(1, len(raw)):
        a = coeffs[j]
        work[:j] = coeffs[:j] - a * coeffs[:j][::-1]
        coeffs[:j] = work[:j]
    return coeffs


def _coeffs_to_pacf_raw(coeffs: np.ndarray) -> np.ndarray | None:
    """Inverse of _pacf_to_coeffs; None if the polynomial is not stationary."""
    params = np.asarray(coeffs, dtype=np.float64).copy()
    work = params.copy()
    for j in range(len(params) - 1, 0, -1):
        a = params[j]
        if abs(a) >= 1.0:
            return None
        work[:j] = (params[:j] + a * params[:j][::-1]) / (1.0 - a * a)
        params[:j] = work[:j]
    if np.any(np.abs(params) >= 1.0):
        return None
    return 2.0 * np.arctanh(params)


def _factor_poly(coeffs: np.ndarray, stride: int) -> np.ndarray:
    """Ascending lag polynomial 1 - c_1 B^stride - c_2 B^(2 stride) - ..."""
    poly = np.zeros(len(coeffs) * stride + 1)
    poly[0] = 1.0
    for i, c in enumerate(coeffs, start=1):
        poly[i * stride] = -c
    return poly


def _expand(nonseasonal: np.ndarray, seasonal: np.ndarray, s: int) -> np.ndarray:
    return np.convolve(_factor_poly(nonseasonal, 1), _factor_poly(seasonal, max(s, 1)))


def _diff_poly(d: int, D: int, s: int) -> np.ndarray:
    poly = np.array([1.0])
    for _ in range(d):
        poly = np.convolve(poly, [1.0, -1.0])
    for _ in range(D):
        seasonal = np.zeros(s + 1)
        seasonal[0], seasonal[s] = 1.0, -1.0
        poly = np.convolve(poly, seasonal)
    return poly


def _min_root_modulus(coeffs: np.ndarray) -> float:
    """Smallest root modulus of 1 - c_1 z - ... - c_k z^k (inf if degree 0)."""
    poly = np.concatenate(([1.0], -np.asarray(coeffs, dtype=np.float64)))
    poly = np.trim_zeros(poly, "b")
    if len(poly) <= 1:
        return np.inf
    roots = np.roots(poly[::-1])
    return float(np.min(np.abs(roots)))


# -- conditional-sum-of-squares likelihood ----------------------------------


def _css_residuals(
    w: np.ndarray,
    spec: ArimaSpec,
    phi: np.ndarray,
    theta: np.ndarray,
    Phi: np.ndarray,
    Theta: np.ndarray,
    constant: float,
) -> np.ndarray:
    """Residuals of the ARMA recursion on the differenced series.

    Conditional on the first p + s*P values; pre-sample residuals are zero.
    """
    ar = _expand(phi, Phi, spec.s)
    ma = _expand(theta, Theta, spec.s)
    r_w = len(ar) - 1
    if len(w) <= r_w:
        raise InsufficientDataError("differenced series shorter than the AR depth")
    rhs = lfilter(ar, [1.0], w)[r_w:] - constant
    if len(ma) > 1:
        return lfilter([1.0], ma, rhs)
    return rhs


def conditional_loglik(
    values: np.ndarray,
    spec: ArimaSpec,
    phi: np.ndarray,
    theta: np.ndarray,
    Phi: np.ndarray,
    Theta: np.ndarray,
    constant: float = 0.0,
) -> float:
    """Gaussian CSS log-likelihood with the innovation variance concentrated out."""
    w = difference(values, spec.d, spec.D, spec.s)
    e = _css_residuals(w, spec, np.asarray(phi), np.asarray(theta), np.asarray(Phi),
                       np.asarray(Theta), constant)
    n = len(e)
    if n < 1:
        raise InsufficientDataError("no residuals left after conditioning")
    sse = float(e @ e)
    sigma2 = max(sse / n, 1e-300)
    return -0.5 * n * (np.log(2.0 * np.pi * sigma2) + 1.0)


@dataclass(frozen=True)
class ArimaModel:
    """Fitted (seasonal) ARIMA model; immutable after fit."""

    spec: ArimaSpec
    phi: np.ndarray
    theta: np.ndarray
    Phi: np.ndarray
    Theta: np.ndarray
    constant: float
    sigma2: float
    loglik: float
    #: training residuals, oldest first (last q + s*Q of the CSS recursion)
    residual_tail: np.ndarray
    ar_level: np.ndarray = field(init=False)  # expanded polynomial on levels
    ma_full: np.ndarray = field(init=False)

    def __post_init__(self):
        for name in ("phi", "theta", "Phi", "Theta", "residual_tail"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        ar_w = _expand(self.phi, self.Phi, self.spec.s)
        level = np.convolve(ar_w, _diff_poly(self.spec.d, self.spec.D, self.spec.s))
        object.__setattr__(self, "ar_level", level)
        object.__setattr__(self, "ma_full", _expand(self.theta, self.Theta, self.spec.s))

    @property
    def level_lag_depth(self) -> int:
        """Number of past levels one prediction needs: p + s*P + d + s*D."""
        return len(self.ar_level) - 1

    @property
    def ma_depth(self) -> int:
        return len(self.ma_full) - 1

    def to_json(self) -> str:
        payload = {
            "spec": {
                "p": self.spec.p, "d": self.spec.d, "q": self.spec.q,
                "P": self.spec.P, "D": self.spec.D, "Q": self.spec.Q,
                "s": self.spec.s, "include_constant": self.spec.include_constant,
            },
            "phi": self.phi.tolist(),
            "theta": self.theta.tolist(),
            "Phi": self.Phi.tolist(),
            "Theta": self.Theta.tolist(),
            "constant": self.constant,
            "sigma2": self.sigma2,
            "loglik": self.loglik,
            "residual_tail": self.residual_tail.tolist(),
        }
        return json.dumps(payload)

    @staticmethod
    def from_json(text: str) -> "ArimaModel":
        payload = json.loads(text)
        return ArimaModel(
            spec=ArimaSpec(**payload["spec"]),
            phi=np.array(payload["phi"]),
            theta=np.array(payload["theta"]),
            Phi=np.array(payload["Phi"]),
            Theta=np.array(payload["Theta"]),
            constant=payload["constant"],
            sigma2=payload["sigma2"],
            loglik=payload["loglik"],
            residual_tail=np.array(payload["residual_tail"]),
        )


def arima_predict_one(
    model: ArimaModel, lag_vector: np.ndarray, residual_state: np.ndarray
) -> tuple[float, np.ndarray]:
    """One-step conditional expectation and the advanced residual state.

    ``lag_vector`` holds the newest level first and must cover the model's
    level lag depth; ``residual_state`` holds the newest residual first with
    length ma_depth. The advanced state shifts in a zero for the unobserved
    future shock.
    """
    lag_vector = np.asarray(lag_vector, dtype=np.float64)
    residual_state = np.asarray(residual_state, dtype=np.float64)
    r = model.level_lag_depth
    h = model.ma_depth
    if lag_vector.shape != (r,):
        raise DimensionError(f"lag vector must have length {r}, got {lag_vector.shape}")
    if residual_state.shape != (h,):
        raise DimensionError(f"residual state must have length {h}")
    value = model.constant - float(model.ar_level[1:] @ lag_vector)
    if h:
        value += float(model.ma_full[1:] @ residual_state)
        residual_state = np.concatenate(([0.0], residual_state[:-1]))
    return value, residual_state


class ArimaForecaster(Forecaster):
    """Adapter exposing a fitted ARIMA model to the recursive engine.

    ``begin`` filters one-step residuals over the observed history (gaps
    filled with the finite mean, which only matters on gappy data) and
    precomputes each origin's decaying moving-average correction.
    """

    def __init__(self, model: ArimaModel):
        self.model = model

    def required_lags(self) -> np.ndarray:
        return -np.arange(self.model.level_lag_depth)

    def predict_one(self, lag_vector: np.ndarray) -> float:
        state = self.model.residual_tail[::-1][: self.model.ma_depth]
        if len(state) < self.model.ma_depth:
            state = np.concatenate([state, np.zeros(self.model.ma_depth - len(state))])
        value, _ = arima_predict_one(self.model, lag_vector, state)
        return value

    def begin(self, history: np.ndarray, origins: np.ndarray, horizon: int) -> Any:
        model = self.model
        h = model.ma_depth
        if h == 0:
            return None
        spec = model.spec
        filled = np.asarray(history, dtype=np.float64).copy()
        bad = ~np.isfinite(filled)
        if bad.any():
            filled[bad] = np.nanmean(np.where(bad, np.nan, filled))
        w = difference(filled, spec.d, spec.D, spec.s)
        e = _css_residuals(w, spec, model.phi, model.theta, model.Phi, model.Theta,
                           model.constant)
        # residual at level time t lives at e[t - offset]; earlier times are 0
        offset = len(filled) - len(e)
        padded = np.concatenate([np.zeros(offset + h), e])
        lag_index = (origins[:, None] + h) - np.arange(h)[None, :]
        window = padded[lag_index]  # (m, h): e_t, e_{t-1}, ...
        contrib = np.zeros((len(origins), horizon))
        for j in range(1, min(horizon, h) + 1):
            contrib[:, j - 1] = window[:, : h - j + 1] @ model.ma_full[j:]
        return contrib

    def predict_step(self, lag_matrix: np.ndarray, state: Any, step: int) -> np.ndarray:
        values = self.model.constant - lag_matrix @ self.model.ar_level[1:]
        if state is not None:
            values = values + state[:, step - 1]
        return values


# -- fitting -----------------------------------------------------------------


def _hannan_rissanen_init(w: np.ndarray, spec: ArimaSpec) -> np.ndarray | None:
    """Initial (phi, theta) for non-seasonal parts by two-stage regression."""
    p, q = spec.p, spec.q
    if p + q == 0:
        return None
    long_order = min(max(10, 2 * (p + q)), len(w) // 5)
    if long_order < 1 or len(w) < long_order + max(p, q) + 20:
        return None
    rows = len(w) - long_order
    lag_matrix = np.column_stack(
        [w[long_order - i : long_order - i + rows] for i in range(1, long_order + 1)]
    )
    design = np.column_stack([np.ones(rows), lag_matrix])
    coeffs, *_ = np.linalg.lstsq(design, w[long_order:], rcond=None)
    ehat = w[long_order:] - design @ coeffs
    start = max(p, q)
    n2 = rows - start
    if n2 < p + q + 5:
        return None
    cols = [np.ones(n2)]
    cols += [w[long_order + start - i : long_order + start - i + n2] for i in range(1, p + 1)]
    cols += [ehat[start - j : start - j + n2] for j in range(1, q + 1)]
    beta, *_ = np.linalg.lstsq(np.column_stack(cols), w[long_order + start :], rcond=None)
    phi0 = beta[1 : 1 + p]
    theta0 = -beta[1 + p : 1 + p + q]
    return np.concatenate([phi0, theta0])


def _shrink_to_stationary(coeffs: np.ndarray) -> np.ndarray:
    """Raw parameters for coefficients, shrinking toward zero until feasible."""
    factor = 1.0
    for _ in range(8):
        raw = _coeffs_to_pacf_raw(coeffs * factor)
        if raw is not None and np.all(np.abs(raw) < 10.0):
            return raw
        factor *= 0.5
    return np.zeros(len(coeffs))


def fit_arima(
    training, spec: ArimaSpec, timeout_secs: float | None = None
) -> ArimaModel:
    """Maximum-likelihood fit (conditional sum of squares) of one model structure.

    Raises UnstableModelError when the optimum sits on or inside the unit
    circle margin, FitTimeoutError when the wall-clock budget is exceeded,
    and InsufficientDataError for short series.
    """
    values = np.asarray(getattr(training, "values", training), dtype=np.float64)
    if not np.isfinite(values).all():
        raise ValueError("training data must be finite (fill or drop gaps first)")
    if len(values) < spec.min_training_length:
        raise InsufficientDataError(
            f"need >= {spec.min_training_length} observations, have {len(values)}"
        )
    w = difference(values, spec.d, spec.D, spec.s)
    deadline = None if timeout_secs is None else _time.monotonic() + timeout_secs
    p, q, P, Q = spec.p, spec.q, spec.P, spec.Q

    def unpack(x: np.ndarray):
        phi = _pacf_to_coeffs(x[:p]) if p else np.empty(0)
        Phi = _pacf_to_coeffs(x[p : p + P]) if P else np.empty(0)
        theta = _pacf_to_coeffs(x[p + P : p + P + q]) if q else np.empty(0)
        Theta = _pacf_to_coeffs(x[p + P + q : p + P + q + Q]) if Q else np.empty(0)
        constant = x[-1] if spec.include_constant else 0.0
        return phi, theta, Phi, Theta, constant

    def objective(x: np.ndarray) -> float:
        if deadline is not None and _time.monotonic() > deadline:
            raise FitTimeoutError(f"fit exceeded {timeout_secs} s budget")
        phi, theta, Phi, Theta, constant = unpack(x)
        e = _css_residuals(w, spec, phi, theta, Phi, Theta, constant)
        n = len(e)
        sse = float(e @ e)
        if not np.isfinite(sse):
            return 1e300
        sigma2 = max(sse / n, 1e-300)
        return 0.5 * n * (np.log(2.0 * np.pi * sigma2) + 1.0)

    n_free = spec.n_params
    if n_free == 0:
        # p = q = P = Q = 0 without constant: nothing to estimate
        e = _css_residuals(w, spec, np.empty(0), np.empty(0), np.empty(0), np.empty(0), 0.0)
        sigma2 = float(e @ e) / len(e)
        loglik = -0.5 * len(e) * (np.log(2.0 * np.pi * max(sigma2, 1e-300)) + 1.0)
        return ArimaModel(
            spec=spec, phi=np.empty(0), theta=np.empty(0), Phi=np.empty(0),
            Theta=np.empty(0), constant=0.0, sigma2=sigma2, loglik=loglik,
            residual_tail=np.empty(0),
        )

    x0 = np.zeros(n_free)
    hr = _hannan_rissanen_init(w, spec)
    if hr is not None:
        if p:
            x0[:p] = _shrink_to_stationary(hr[:p])
        if q:
            x0[p + P : p + P + q] = _shrink_to_stationary(hr[p : p + q])
    if spec.include_constant:
        x0[-1] = float(np.mean(w))

    best = None
    try:
        result = optimize.minimize(objective, x0, method="L-BFGS-B",
                                   options={"maxiter": 300})
        if np.isfinite(result.fun):
            best = result
        if result is None or not result.success:
            retry = optimize.minimize(objective, x0, method="Nelder-Mead",
                                      options={"maxiter": 400 * n_free, "xatol": 1e-6,
                                               "fatol": 1e-8})
            if np.isfinite(retry.fun) and (best is None or retry.fun < best.fun):
                best = retry
    except FitTimeoutError:
        raise
    if best is None or not np.isfinite(best.fun):
        raise UnstableModelError("optimizer failed to converge to a finite optimum")

    phi, theta, Phi, Theta, constant = unpack(best.x)
    for name, coeffs in (("AR", phi), ("MA", theta), ("seasonal AR", Phi),
                         ("seasonal MA", Theta)):
        if _min_root_modulus(coeffs) < ROOT_MARGIN:
            raise UnstableModelError(
                f"{name} polynomial root inside the {ROOT_MARGIN} margin"
            )
    e = _css_residuals(w, spec, phi, theta, Phi, Theta, constant)
    sigma2 = float(e @ e) / len(e)
    h = spec.q + spec.s * spec.Q
    return ArimaModel(
        spec=spec, phi=phi, theta=theta, Phi=Phi, Theta=Theta, constant=float(constant),
        sigma2=sigma2, loglik=-float(best.fun), residual_tail=e[-h:] if h else np.empty(0),
    )
