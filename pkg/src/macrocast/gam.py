"""Additive model with penalized cubic B-spline (P-spline) smooths.

Each smooth uses K = 10 cubic B-splines on equally spaced knots spanning the
training range of its feature, a second-order difference penalty, and a
sum-to-zero constraint over the training rows so that the global intercept is
identifiable.  Smoothing parameters are picked from a log grid by GCV, one
feature at a time, sweeping until no coordinate changes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline

from .errors import DimensionMismatch, MinimumRows, SingularSystem

DEGREE = 3
N_BASIS = 10
MIN_ROWS = 12
LAMBDA_GRID = tuple(10.0 ** k for k in range(-4, 7))


@dataclass
class SplineBasis:
    lo: float
    hi: float
    n_basis: int = N_BASIS
    degree: int = DEGREE

    @property
    def knots(self) -> np.ndarray:
        n_intervals = self.n_basis - self.degree
        dx = (self.hi - self.lo) / n_intervals
        t = self.lo + dx * np.arange(-self.degree, n_intervals + self.degree + 1)
        t[self.degree] = self.lo
        t[self.degree + n_intervals] = self.hi
        return t

    def _spline(self):
        return BSpline(self.knots, np.eye(self.n_basis), self.degree, extrapolate=False)

    def design(self, x) -> np.ndarray:
        """Basis values; outside [lo, hi] the boundary piece is extended linearly."""
        x = np.asarray(x, dtype=np.float64)
        inside = np.clip(x, self.lo, self.hi)
        spline = self._spline()
        B = spline(inside)
        out = (x < self.lo) | (x > self.hi)
        if out.any():
            dspline = spline.derivative()
            for edge, mask in ((self.lo, x < self.lo), (self.hi, x > self.hi)):
                if mask.any():
                    B[mask] = spline(np.array([edge]))[0] + np.outer(x[mask] - edge, dspline(np.array([edge]))[0])
        return np.nan_to_num(B, nan=0.0)


def difference_penalty(n: int, order: int = 2) -> np.ndarray:
    D = np.diff(np.eye(n), n=order, axis=0)
    return D.T @ D


@dataclass
class Smooth:
    feature: int
    basis: SplineBasis | None
    constraint: np.ndarray  # K x (K-1) null-space basis of the centering constraint
    coef: np.ndarray = field(default_factory=lambda: np.zeros(0))
    lam: float = 0.0

    def design(self, x) -> np.ndarray:
        if self.basis is None:
            return np.zeros((len(x), 0))
        return self.basis.design(x) @ self.constraint

    def evaluate(self, x) -> np.ndarray:
        if self.basis is None:
            return np.zeros(len(x))
        return self.design(x) @ self.coef


@dataclass
class GamFit:
    intercept: float
    smooths: list
    lambdas: np.ndarray
    gcv: float
    edf: float
    n_features: int

    def predict(self, X, return_flags: bool = False):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got {X.shape[1]}")
        pred = np.full(X.shape[0], self.intercept)
        flags = np.zeros(X.shape[0], dtype=bool)
        for s in self.smooths:
            x = X[:, s.feature]
            pred += s.evaluate(x)
            if s.basis is not None:
                flags |= (x < s.basis.lo) | (x > s.basis.hi)
        return (pred, flags) if return_flags else pred


def _build_smooths(X: np.ndarray):
    smooths, blocks, penalties = [], [], []
    for j in range(X.shape[1]):
        x = X[:, j]
        lo, hi = float(x.min()), float(x.max())
        if not hi > lo:
            # constant over the window: the smooth carries no information
            smooths.append(Smooth(j, None, np.zeros((N_BASIS, 0))))
            blocks.append(np.zeros((len(x), 0)))
            penalties.append(np.zeros((0, 0)))
            continue
        basis = SplineBasis(lo, hi)
        B = basis.design(x)
        # centering: columns of Z span {c : 1'Bc = 0}
        q, _ = np.linalg.qr(B.sum(axis=0)[:, None], mode="complete")
        Z = q[:, 1:]
        smooths.append(Smooth(j, basis, Z))
        blocks.append(B @ Z)
        penalties.append(Z.T @ difference_penalty(N_BASIS) @ Z)
    return smooths, blocks, penalties


def _solve(XtX, Xty, S):
    A = XtX + S
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        raise SingularSystem("penalized normal equations are not positive definite") from None
    coef = np.linalg.solve(L.T, np.linalg.solve(L, Xty))
    # trace of the influence matrix = tr(A^-1 XtX)
    edf = float(np.trace(np.linalg.solve(L.T, np.linalg.solve(L, XtX))))
    return coef, edf


def _gcv(Xd, y, XtX, Xty, S):
    n = len(y)
    coef, edf = _solve(XtX, Xty, S)
    resid = y - Xd @ coef
    rss = float(resid @ resid)
    denom = (n - edf) ** 2
    if denom <= 0:
        return np.inf, coef, edf
    return n * rss / denom, coef, edf


def fit_gam(X, y, lambdas=None, max_sweeps: int = 10) -> GamFit:
    """Fit the additive model.

    With ``lambdas`` given (one per feature) no selection is done; otherwise
    each lambda is chosen from ``LAMBDA_GRID`` by coordinate-wise GCV.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise DimensionMismatch("X must be 2-D with one target per row")
    n, p = X.shape
    if n < MIN_ROWS:
        raise MinimumRows(f"GAM needs at least {MIN_ROWS} training rows, got {n}")

    smooths, blocks, penalties = _build_smooths(X)
    sizes = [b.shape[1] for b in blocks]
    offsets = np.concatenate([[1], 1 + np.cumsum(sizes)])
    Xd = np.column_stack([np.ones(n)] + blocks)
    XtX = Xd.T @ Xd
    Xty = Xd.T @ y

    def penalty(lams):
        S = np.zeros_like(XtX)
        for j in range(p):
            a, b = offsets[j], offsets[j + 1]
            S[a:b, a:b] = lams[j] * penalties[j]
        return S

    if lambdas is not None:
        lams = np.asarray(lambdas, dtype=np.float64)
        if lams.shape != (p,) or np.any(lams < 0):
            raise ValueError("lambdas must be one non-negative value per feature")
        score, coef, edf = _gcv(Xd, y, XtX, Xty, penalty(lams))
    else:
        lams = np.full(p, 1.0)
        score, coef, edf = _gcv(Xd, y, XtX, Xty, penalty(lams))
        for _ in range(max_sweeps):
            changed = False
            for j in range(p):
                if sizes[j] == 0:
                    continue
                best = (score, lams[j], coef, edf)
                for lam in LAMBDA_GRID:
                    if lam == lams[j]:
                        continue
                    trial = lams.copy()
                    trial[j] = lam
                    s, c, e = _gcv(Xd, y, XtX, Xty, penalty(trial))
                    # strict improvement only, so ties keep the current value
                    if s < best[0] * (1 - 1e-12):
                        best = (s, lam, c, e)
                if best[1] != lams[j]:
                    lams[j] = best[1]
                    score, coef, edf = best[0], best[2], best[3]
                    changed = True
            if not changed:
                break

    for j, s in enumerate(smooths):
        s.coef = coef[offsets[j]:offsets[j + 1]]
        s.lam = float(lams[j])
    return GamFit(float(coef[0]), smooths, lams, float(score), float(edf), p)


def predict_gam(fit: GamFit, X, return_flags: bool = False):
    return fit.predict(X, return_flags=return_flags)


def gcv_score(X, y, lambdas) -> float:
    """GCV criterion of a fit at fixed smoothing parameters."""
    return fit_gam(X, y, lambdas=lambdas).gcv
