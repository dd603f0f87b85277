"""ARIMA(p, d, q) with exogenous regressors, fitted by conditional sum of squares.

After differencing both the target and the regressors d times the model is

    w_t = c + sum_i phi_i w_{t-i} + sum_j psi_j e_{t-j} + z_t' gamma + e_t

with the intercept c present only when d = 0.  Residuals before index
max(p, q) are conditioned to zero.  Estimation runs the package's L-BFGS on a
centred/scaled copy of the data, starting from the least-squares fit with
psi = 0, and maps the coefficients back to original units.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from . import optim
from .errors import (
    DimensionMismatch,
    HorizonMismatch,
    ModelError,
    NonStationaryFit,
    RankDeficientExogenous,
    TrainingTooShort,
)

ORDER_GRID = tuple(itertools.product(range(3), range(2), range(3)))
MIN_BASE_LENGTH = 12


def minimum_length(order) -> int:
    p, d, q = order
    return MIN_BASE_LENGTH + p + d + q


@dataclass
class ArimaxFit:
    order: tuple
    phi: np.ndarray
    psi: np.ndarray
    gamma: np.ndarray
    intercept: float
    sigma2: float
    y_tail: np.ndarray  # last p + d raw target values
    x_tail: np.ndarray  # last d raw regressor rows
    resid_tail: np.ndarray  # last q residuals
    css: float = math.nan
    n_used: int = 0
    aic: float = math.nan
    candidates: dict = field(default_factory=dict)

    def forecast(self, X_future, h: int | None = None) -> np.ndarray:
        return forecast_arimax(self, X_future, h)


def ar_is_stationary(phi) -> bool:
    """True when every root of 1 - phi_1 z - ... - phi_p z^p lies outside the unit circle."""
    phi = np.asarray(phi, dtype=np.float64)
    if phi.size == 0 or not np.any(phi):
        return True
    # numpy.roots wants the highest power first
    roots = np.roots(np.concatenate([-phi[::-1], [1.0]]))
    return bool(np.all(np.abs(roots) > 1.0 + 1e-8))


def _css_objective(target, R, q):
    n_eff = len(target)
    k = R.shape[1]

    @np.errstate(over="ignore", invalid="ignore")
    def fun(theta, _batch):
        # trial steps with a non-invertible MA part blow up; L-BFGS backs off from inf
        beta, psi = theta[:k], theta[k:]
        a = np.concatenate([[1.0], psi])
        r = target - R @ beta
        e = lfilter([1.0], a, r)
        loss = float(e @ e) / n_eff
        de = np.empty((n_eff, k + q))
        if k:
            de[:, :k] = lfilter([1.0], a, -R, axis=0)
        for j in range(1, q + 1):
            shifted = np.concatenate([np.zeros(j), e[:-j]]) if j < n_eff else np.zeros(n_eff)
            de[:, k + j - 1] = lfilter([1.0], a, -shifted)
        return loss, (2.0 / n_eff) * (de.T @ e)

    return optim.Objective(fun, k + q)


def _fit_order(X, y, order, intercept=None) -> ArimaxFit:
    p, d, q = order
    n = len(y)
    if n < minimum_length(order):
        raise TrainingTooShort(
            f"ARIMA{order} needs at least {minimum_length(order)} training rows, got {n}"
        )
    w = np.diff(y, n=d) if d else y.copy()
    Z = np.diff(X, n=d, axis=0) if d else X.copy()
    N, k = Z.shape
    has_intercept = d == 0 if intercept is None else bool(intercept)

    w_mean = float(w.mean()) if has_intercept else 0.0
    w_sd = float(np.std(w, ddof=1))
    if not w_sd > 0:
        w_sd = 1.0
    z_mean = Z.mean(axis=0) if has_intercept else np.zeros(k)
    z_sd = Z.std(axis=0, ddof=1) if N > 1 else np.zeros(k)
    flat = np.flatnonzero(~(z_sd > 1e-12 * np.maximum(1.0, np.abs(Z).max(axis=0, initial=0.0))))
    if flat.size:
        raise RankDeficientExogenous(f"regressor column(s) {flat.tolist()} constant after differencing")
    ws = (w - w_mean) / w_sd
    Zs = (Z - z_mean) / z_sd

    exog_design = np.column_stack(([np.ones(N)] if has_intercept else []) + [Zs])
    if exog_design.shape[1] and np.linalg.matrix_rank(exog_design) < exog_design.shape[1]:
        raise RankDeficientExogenous("regressors are collinear after differencing")

    m = max(p, q)
    n_eff = N - m
    n_coef = int(has_intercept) + p + k + q
    if n_eff <= n_coef:
        raise TrainingTooShort(f"ARIMA{order}: {n_eff} usable rows for {n_coef} coefficients")

    cols = []
    if has_intercept:
        cols.append(np.ones(n_eff))
    for i in range(1, p + 1):
        cols.append(ws[m - i:N - i])
    R = np.column_stack(cols + [Zs[m:]])
    target = ws[m:]

    beta0 = np.linalg.lstsq(R, target, rcond=None)[0] if R.shape[1] else np.zeros(0)
    theta0 = np.concatenate([beta0, np.zeros(q)])
    objective = _css_objective(target, R, q)
    if objective.dimension:
        theta, _ = optim.lbfgs_minimize(
            objective, theta0, optim.LBFGSConfig(gradient_tolerance=1e-9, max_iterations=500)
        )
    else:
        theta = theta0
    loss, _ = objective.evaluate(theta)
    if not math.isfinite(loss):
        raise ModelError(f"ARIMA{order}: non-finite conditional sum of squares")

    pos = 0
    c_s = 0.0
    if has_intercept:
        c_s = theta[0]
        pos = 1
    phi = theta[pos:pos + p].copy()
    gamma_s = theta[pos + p:pos + p + k]
    psi = theta[pos + p + k:].copy()
    if not ar_is_stationary(phi):
        raise NonStationaryFit(f"ARIMA{order}: fitted AR polynomial has a root inside the unit circle")

    gamma = gamma_s * w_sd / z_sd
    intercept = 0.0
    if has_intercept:
        intercept = float(w_mean * (1.0 - phi.sum()) + w_sd * c_s - gamma @ z_mean)

    resid_s = lfilter([1.0], np.concatenate([[1.0], psi]), target - R @ theta[:R.shape[1]])
    resid = np.concatenate([np.zeros(m), resid_s * w_sd])
    css = float(resid @ resid)
    sigma2 = css / n_eff
    n_params = n_coef + 1
    loglik = -0.5 * n_eff * (math.log(2 * math.pi * sigma2) + 1.0) if sigma2 > 0 else math.inf
    aic = -2.0 * loglik + 2.0 * n_params

    return ArimaxFit(
        order=tuple(order),
        phi=phi,
        psi=psi,
        gamma=gamma,
        intercept=intercept,
        sigma2=sigma2,
        y_tail=y[n - (p + d):].copy() if p + d else np.zeros(0),
        x_tail=X[n - d:].copy() if d else np.zeros((0, k)),
        resid_tail=resid[N - q:].copy() if q else np.zeros(0),
        css=css,
        n_used=n_eff,
        aic=aic,
    )


def fit_arimax(X, y, order="auto", intercept=None) -> ArimaxFit:
    """Fit a fixed order, or pick (p, d, q) from ``ORDER_GRID`` by AIC when ``order='auto'``.

    ``intercept`` forces the constant term on or off; by default it is fitted
    only for undifferenced orders.

    Candidates that are too short, non-stationary or otherwise unfittable are
    skipped; if none survives, the most telling error is raised
    (TrainingTooShort when every candidate was too short).
    """
    y = np.asarray(y, dtype=np.float64)
    X = np.zeros((len(y), 0)) if X is None else np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != len(y):
        raise DimensionMismatch("X must be 2-D with one row per target value")
    if order != "auto":
        order = tuple(int(v) for v in order)
        if len(order) != 3 or min(order) < 0:
            raise ValueError(f"bad ARIMA order {order}")
        return _fit_order(X, y, order, intercept)

    shortest = min(minimum_length(o) for o in ORDER_GRID)
    if len(y) < shortest:
        raise TrainingTooShort(f"ARIMA needs at least {shortest} training rows, got {len(y)}")
    best, candidates, errors = None, {}, []
    for cand in ORDER_GRID:
        try:
            fit = _fit_order(X, y, cand, intercept)
        except ModelError as exc:
            errors.append(exc)
            continue
        candidates[cand] = fit.aic
        if best is None or fit.aic < best.aic:
            best = fit
    if best is None:
        if all(isinstance(e, TrainingTooShort) for e in errors):
            raise TrainingTooShort(f"no ARIMA order fits {len(y)} training rows")
        raise next(e for e in errors if not isinstance(e, TrainingTooShort))
    best.candidates = candidates
    return best


def forecast_arimax(fit: ArimaxFit, X_future, h: int | None = None) -> np.ndarray:
    """Iterated forecasts with future innovations set to zero.

    ``X_future`` holds the observed regressor rows for the h forecast months.
    """
    p, d, q = fit.order
    k = fit.gamma.size
    X_future = np.zeros((0 if h is None else h, k)) if X_future is None else np.atleast_2d(np.asarray(X_future, dtype=np.float64))
    if k == 0 and X_future.size == 0 and h is not None:
        X_future = np.zeros((h, 0))
    if h is None:
        h = X_future.shape[0]
    if X_future.shape[0] != h:
        raise HorizonMismatch(f"{X_future.shape[0]} regressor rows supplied for horizon {h}")
    if X_future.shape[1] != k:
        raise DimensionMismatch(f"expected {k} regressors, got {X_future.shape[1]}")

    Z = np.diff(np.vstack([fit.x_tail, X_future]), n=d, axis=0) if d else X_future
    # levels[i] holds the tail of the i-times differenced target
    levels = [list(fit.y_tail)]
    for _ in range(d):
        levels.append(list(np.diff(levels[-1])))
    w_hist = levels[d]
    e_hist = list(fit.resid_tail)

    out = np.empty(h)
    for step in range(h):
        w_new = fit.intercept + float(Z[step] @ fit.gamma) if k else fit.intercept
        for i in range(1, p + 1):
            w_new += fit.phi[i - 1] * w_hist[-i]
        for j in range(1, q + 1):
            if j <= len(e_hist):
                w_new += fit.psi[j - 1] * e_hist[-j]
        e_hist.append(0.0)
        w_hist.append(w_new)
        value = w_new
        for level in range(d - 1, -1, -1):
            value = levels[level][-1] + value
            levels[level].append(value)
        out[step] = value
    return out
