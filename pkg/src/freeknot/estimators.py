"""Scikit-learn style wrappers around the free-knot spline constructions.

``X`` holds the sample times (shape ``(n,)`` or ``(n, 1)``) on a uniform,
strictly increasing grid; ``y`` the sampled values.
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .core import build_spline, build_spline_eps, piece_errors, aggregate
from .exceptions import InvalidArgumentError
from .paths import SampledPath
from .polyfit import check_p, check_r

GRID_RTOL = 1e-9


def uniform_path(X, y, kind="synthetic") -> SampledPath:
    """Validate ``(times, values)`` and return them as a :class:`SampledPath`."""
    t, v = check_X_y(X, y, ensure_2d=False, y_numeric=True, ensure_min_samples=2)
    t = np.asarray(t, dtype=float)
    if t.ndim == 2:
        if t.shape[1] != 1:
            raise InvalidArgumentError("X must hold a single column of sample times")
        t = t[:, 0]
    d = np.diff(t)
    if np.any(d <= 0):
        raise InvalidArgumentError("sample times must be strictly increasing")
    step = (t[-1] - t[0]) / (t.size - 1)
    if np.max(np.abs(d - step)) > GRID_RTOL * max(1.0, abs(t[-1])) + 1e-12 * step:
        raise InvalidArgumentError("sample times must form a uniform grid")
    return SampledPath(float(t[0]), float(step), np.asarray(v, dtype=float), kind)


class _SplineRegressor(RegressorMixin, BaseEstimator):

    def _finish(self, path, spline):
        self.spline_ = spline
        self.knots_ = spline.knots.copy()
        self.piece_errors_ = piece_errors(path, spline, self.p)
        self.error_ = aggregate(self.piece_errors_, self.p)
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "spline_")
        t = check_array(X, ensure_2d=False)
        if t.ndim == 2:
            t = t[:, 0]
        lo, hi = self.knots_[0], self.knots_[-1]
        if np.any(t < lo - 1e-12) or np.any(t > hi + 1e-12):
            raise InvalidArgumentError(f"prediction times must lie in [{lo}, {hi}]")
        return self.spline_(t)


class FreeKnotSpline(_SplineRegressor):
    """Spline with at most ``k`` pieces whose knots adapt to the sample path.

    Parameters
    ----------
    k : int
        Piece budget.
    r : int
        Polynomial degree of each piece.
    p : float
        Norm index, ``math.inf`` for the sup norm.
    tol_rel : float
        Relative bracket width at which the threshold bisection stops.

    Attributes
    ----------
    gamma_ : float
        Per-piece error level of the fitted spline.
    knots_, spline_, piece_errors_, error_
    """

    def __init__(self, k=8, r=0, p=math.inf, tol_rel=1e-4):
        self.k = k
        self.r = r
        self.p = p
        self.tol_rel = tol_rel

    def fit(self, X, y):
        if int(self.k) != self.k or self.k < 1:
            raise InvalidArgumentError(f"k must be a positive integer, got {self.k}")
        check_r(self.r)
        check_p(self.p)
        path = uniform_path(X, y)
        spline, self.gamma_ = build_spline(path, self.k, self.r, self.p, self.tol_rel)
        return self._finish(path, spline)


class VariableKnotSpline(_SplineRegressor):
    """Spline whose pieces end where the best-fit error first exceeds ``epsilon``."""

    def __init__(self, epsilon=0.1, r=0, p=math.inf):
        self.epsilon = epsilon
        self.r = r
        self.p = p

    def fit(self, X, y):
        if not self.epsilon > 0:
            raise InvalidArgumentError(f"epsilon must be positive, got {self.epsilon}")
        check_r(self.r)
        check_p(self.p)
        path = uniform_path(X, y)
        return self._finish(path, build_spline_eps(path, self.epsilon, self.r, self.p))
