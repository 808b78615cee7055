"""Best discrete L_p approximation of a sampled path by polynomials of degree <= r."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre

from . import _kernels as K
from .exceptions import InvalidArgumentError, NumericFailure, OutOfRangeError
from .paths import SampledPath

MAX_DEGREE = 10


@dataclass(frozen=True)
class Polynomial:
    """Degree ``len(coeffs) - 1`` polynomial on ``[lo, hi]``.

    Coefficients refer to shifted Legendre polynomials: the value at ``t`` is
    ``sum_i coeffs[i] * P_i(2 (t - lo) / (hi - lo) - 1)`` with ``P_i`` the
    classical Legendre polynomials.
    """

    lo: float
    hi: float
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float).ravel()
        if not self.lo < self.hi:
            raise InvalidArgumentError(f"need lo < hi, got [{self.lo}, {self.hi}]")
        if c.size < 1 or not np.all(np.isfinite(c)):
            raise InvalidArgumentError("coefficients must be finite and non-empty")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    def local(self, t):
        return 2.0 * (np.asarray(t, dtype=float) - self.lo) / (self.hi - self.lo) - 1.0

    def __call__(self, t):
        return legendre.legval(self.local(t), self.coeffs)

    @classmethod
    def constant(cls, lo, hi, value):
        return cls(lo, hi, [value])


@dataclass(frozen=True)
class FitResult:
    poly: Polynomial
    delta: float
    iterations: int
    converged: bool


def check_p(p) -> float:
    p = float(p)
    if math.isnan(p) or p < 1:
        raise InvalidArgumentError(f"norm index must satisfy p >= 1, got {p}")
    return p


def check_r(r) -> int:
    if int(r) != r or not 0 <= r <= MAX_DEGREE:
        raise InvalidArgumentError(f"degree r must be an integer in 0..{MAX_DEGREE}, got {r}")
    return int(r)


def _indices(path: SampledPath, u: float, v: float):
    if not u < v:
        raise InvalidArgumentError(f"need u < v, got [{u}, {v}]")
    tol = 1e-9 * path.step
    if u < path.t0 - tol or v > path.t_end + tol:
        raise OutOfRangeError(f"[{u}, {v}] outside path domain [{path.t0}, {path.t_end}]")
    return path.index_of(u), path.index_of(v)


def lp_norm(path: SampledPath, u: float, v: float, p: float) -> float:
    """Trapezoid L_p norm of the path over ``[u, v]`` (grid maximum if ``p = inf``)."""
    p = check_p(p)
    i0, i1 = _indices(path, u, v)
    seg = np.abs(path.values[i0:i1 + 1])
    if math.isinf(p):
        return float(seg.max())
    w = K.trapezoid_weights(seg.size, path.step)
    return float(np.sum(w * seg ** p) ** (1.0 / p))


def best_poly(path: SampledPath, u: float, v: float, r: int, p: float) -> FitResult:
    """Minimiser over degree-``r`` polynomials of the discrete L_p error on ``[u, v]``.

    p = 2 is a weighted least-squares projection, p = inf a discrete minimax
    (exchange) fit, other p use reweighted least squares. Intervals holding
    at most ``r + 1`` grid points are interpolated (delta = 0).
    """
    r, p = check_r(r), check_p(p)
    i0, i1 = _indices(path, u, v)
    coef = np.empty(r + 1)
    d, status, iters = K.fit_segment(path.values, path.step, i0, i1, r, p, coef)
    lo, hi = path.t0 + i0 * path.step, path.t0 + i1 * path.step
    result = FitResult(Polynomial(lo, hi, coef), float(d), int(iters), status == K.OK)
    if not result.converged:
        raise NumericFailure(
            f"best L_{p} fit on [{lo}, {hi}] did not converge after {iters} iterations",
            best=result)
    return result


def delta(path: SampledPath, u: float, v: float, r: int, p: float) -> float:
    """Error of the best degree-``r`` polynomial approximation on ``[u, v]``."""
    return best_poly(path, u, v, r, p).delta
