"""Free-knot spline construction driven by stopping times.

Starting at the left end of the path, each stopping time is the first grid
point at which the best degree-``r`` polynomial error over the current piece
exceeds a threshold ``eps``. ``gamma_k`` is the smallest threshold for which
``k`` such pieces cover the whole domain; the spline ``phi*_k`` fits each of
those pieces separately.

Discretisation conventions
--------------------------
* Knots are grid points. Piece ``j`` owns ``]t_{j-1}, t_j]`` (piece 1 also
  owns the left end) but is fitted, and its error measured, on the closed
  interval ``[t_{j-1}, t_j]``. Consequently the L_p error of a spline is
  ``(sum_j err_j^p)^(1/p)`` (or ``max_j err_j``), each piece contributing its
  own one-sided values at the knots.
* A stopping time equal to the last grid point counts as reaching the end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _kernels as K
from .exceptions import InvalidArgumentError
from .paths import SampledPath
from .polyfit import Polynomial, best_poly, check_p, check_r

DEFAULT_TOL_REL = 1e-4


@dataclass(frozen=True)
class ApproxParams:
    r: int = 0
    s: int = 0
    p: float = math.inf
    q: float = 1.0
    k: int = 1

    def __post_init__(self):
        check_r(self.r)
        check_p(self.p)
        if int(self.s) != self.s or self.s < 0:
            raise InvalidArgumentError(f"integration order s must be >= 0, got {self.s}")
        if not self.q >= 1:
            raise InvalidArgumentError(f"averaging exponent q must be >= 1, got {self.q}")
        if int(self.k) != self.k or self.k < 1:
            raise InvalidArgumentError(f"piece count k must be >= 1, got {self.k}")

    @property
    def beta(self) -> float:
        return beta(self.s, self.p)

    def require_r_ge_s(self):
        if self.r < self.s:
            raise InvalidArgumentError(
                f"approximating W^({self.s}) needs r >= s, got r={self.r}")


def beta(s: int, p: float) -> float:
    """Scaling exponent ``s + 1/2 + 1/p``."""
    return s + 0.5 + (0.0 if math.isinf(p) else 1.0 / p)


@dataclass(frozen=True)
class KnotSchedule:
    epsilon: float
    taus: np.ndarray
    exhausted: bool
    indices: np.ndarray

    @property
    def count(self) -> int:
        """Number of stopping times found after ``taus[0]``."""
        return self.taus.size - 1


@dataclass(frozen=True)
class Spline:
    """Piecewise polynomial with left-open pieces ``]knots[j], knots[j+1]]``."""

    knots: np.ndarray
    pieces: tuple

    def __post_init__(self):
        knots = np.array(self.knots, dtype=float)
        pieces = tuple(self.pieces)
        if knots.ndim != 1 or knots.size < 2:
            raise InvalidArgumentError("a spline needs at least two knots")
        if np.any(np.diff(knots) <= 0):
            raise InvalidArgumentError("knots must be strictly increasing")
        if len(pieces) != knots.size - 1:
            raise InvalidArgumentError("need exactly one polynomial per knot interval")
        knots.flags.writeable = False
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "pieces", pieces)

    @property
    def k(self) -> int:
        return len(self.pieces)

    @property
    def degree(self) -> int:
        return max(piece.degree for piece in self.pieces)

    def piece_index(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        j = np.searchsorted(self.knots, t, side="left") - 1
        return np.clip(j, 0, self.k - 1)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        j = self.piece_index(t)
        out = np.empty(t.shape)
        for idx in np.unique(j):
            mask = j == idx
            out[mask] = self.pieces[idx](t[mask])
        return out


def _span(path: SampledPath, stop_at: Optional[float]):
    end = path.n if stop_at is None else path.index_of(stop_at)
    if end < 1:
        raise InvalidArgumentError("path must contain at least two grid points")
    return 0, end


def stopping_times(path: SampledPath, epsilon: float, r: int, p: float,
                   max_count: Optional[int] = None,
                   stop_at: Optional[float] = None) -> KnotSchedule:
    """Consecutive stopping times at threshold ``epsilon``.

    Scanning stops after ``max_count`` times or at ``stop_at`` (default: end
    of path); running out of path sets ``exhausted``.
    """
    r, p = check_r(r), check_p(p)
    if not epsilon > 0:
        raise InvalidArgumentError(f"threshold must be positive, got {epsilon}")
    start, end = _span(path, stop_at)
    limit = end - start if max_count is None else int(max_count)
    taus = np.empty(limit + 1, dtype=np.int64)
    empty = np.empty(0, dtype=np.int64)
    cnt = K.schedule(path.values, path.step, start, end, float(epsilon), r, p,
                     limit, empty, empty, taus)
    idx = taus[:cnt + 1].copy()
    return KnotSchedule(float(epsilon), path.t0 + idx * path.step, cnt < limit, idx)


def _gamma_search(path, k, r, p, tol_rel, stop_at):
    r, p = check_r(r), check_p(p)
    if int(k) != k or k < 1:
        raise InvalidArgumentError(f"piece count k must be >= 1, got {k}")
    if not 0 < tol_rel < 1:
        raise InvalidArgumentError(f"tol_rel must lie in (0, 1), got {tol_rel}")
    start, end = _span(path, stop_at)
    taus = np.empty(int(k) + 1, dtype=np.int64)
    gam, lo, hi, cnt = K.gamma_search(path.values, path.step, start, end, int(k),
                                      r, p, float(tol_rel), taus)
    interior = [int(i) for i in taus[1:cnt + 1] if i < end]
    return float(gam), [start, *interior, end]


def gamma_k(path: SampledPath, k: int, r: int, p: float,
            tol_rel: float = DEFAULT_TOL_REL, stop_at: Optional[float] = None) -> float:
    """Smallest threshold for which ``k`` stopping intervals cover the path.

    Bisection on the threshold starting from ``[0, delta(whole path)]``;
    returns the bracket midpoint once its relative width is below
    ``tol_rel``, and 0 for a path that is itself a polynomial of degree r.
    """
    return _gamma_search(path, k, r, p, tol_rel, stop_at)[0]


def _fit_pieces(path, knot_idx, r, p):
    pieces = []
    for i0, i1 in zip(knot_idx[:-1], knot_idx[1:]):
        u, v = path.t0 + i0 * path.step, path.t0 + i1 * path.step
        pieces.append(best_poly(path, u, v, r, p).poly)
    knots = path.t0 + np.asarray(knot_idx, dtype=float) * path.step
    return Spline(knots, tuple(pieces))


def build_spline(path: SampledPath, k: int, r: int, p: float,
                 tol_rel: float = DEFAULT_TOL_REL, stop_at: Optional[float] = None):
    """The spline ``phi*_k`` and its threshold: returns ``(spline, gamma)``.

    Knots are the stopping times at the upper end of the final bisection
    bracket (the threshold certified to cover the path), clipped to the end
    of the domain. The spline can have fewer than ``k`` pieces when coverage
    is reached early; a polynomial path yields a single global piece.
    """
    gam, knot_idx = _gamma_search(path, k, r, p, tol_rel, stop_at)
    if gam == 0.0:
        knot_idx = [knot_idx[0], knot_idx[-1]]
    return _fit_pieces(path, knot_idx, check_r(r), check_p(p)), gam


def build_spline_eps(path: SampledPath, epsilon: float, r: int, p: float,
                     stop_at: Optional[float] = None) -> Spline:
    """Variable-knot spline: stopping times at ``epsilon`` until the path is covered."""
    sched = stopping_times(path, epsilon, r, p, stop_at=stop_at)
    start, end = _span(path, stop_at)
    interior = [int(i) for i in sched.indices[1:] if i < end]
    return _fit_pieces(path, [start, *interior, end], check_r(r), check_p(p))


def piece_errors(path: SampledPath, spline: Spline, p: float) -> np.ndarray:
    """L_p error of each piece on its closed knot interval."""
    p = check_p(p)
    tol = 1e-9 * path.step
    if spline.knots[0] < path.t0 - tol or spline.knots[-1] > path.t_end + tol:
        raise InvalidArgumentError(
            f"spline domain [{spline.knots[0]}, {spline.knots[-1]}] not covered by "
            f"path [{path.t0}, {path.t_end}]")
    x = (spline.knots - path.t0) / path.step
    idx = np.rint(x).astype(np.int64)
    if np.any(np.abs(x - idx) > 1e-6):
        raise InvalidArgumentError("spline knots must lie on the path grid")
    times = path.times
    out = np.empty(spline.k)
    for j, piece in enumerate(spline.pieces):
        i0, i1 = idx[j], idx[j + 1]
        e = path.values[i0:i1 + 1] - piece(times[i0:i1 + 1])
        out[j] = K.lp_of(e, K.trapezoid_weights(e.size, path.step), p)
    return out


def aggregate(errors: Sequence[float], p: float) -> float:
    errors = np.asarray(errors, dtype=float)
    if math.isinf(p):
        return float(errors.max())
    return float(np.sum(errors ** p) ** (1.0 / p))


def spline_error(path: SampledPath, spline: Spline, p: float) -> float:
    """Discrete L_p distance between path and spline over the spline's domain."""
    return aggregate(piece_errors(path, spline, p), check_p(p))


def phi_star_error(path: SampledPath, k: int, r: int, p: float,
                   tol_rel: float = DEFAULT_TOL_REL):
    """Fast ``(gamma, error, pieces)`` for ``phi*_k`` without materialising it."""
    r, p = check_r(r), check_p(p)
    g, e, m = K.phi_star_error(path.values, path.step, 0, path.n, int(k), r, p, tol_rel)
    return float(g), float(e), int(m)
