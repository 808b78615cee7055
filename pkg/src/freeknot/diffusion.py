"""Piecewise-constant approximation of scalar diffusions.

The path is split as ``X = Y + M`` with the drift part
``Y(t) = x0 + int_0^t a(X) ds`` and the martingale part
``M(t) = int_0^t b(X) dW``, both as left-point sums on the simulation grid
(so ``X = Y + M`` holds for Euler paths up to rounding). ``Y`` is sampled at
equidistant knots; ``M`` is replaced by ``R^ + V^`` where ``V^`` uses a
free-knot approximation of the driving Wiener path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _kernels as K
from .core import Spline, _gamma_search, build_spline
from .exceptions import InvalidArgumentError
from .experiments import (EstimateWithError, McConfig, StudyResult, fit_loglog,
                          run_replicates)
from .paths import (RngStream, SampledPath, SdeCoefficients, simulate_diffusion,
                    simulate_diffusion_batch)
from .polyfit import Polynomial, check_p


@dataclass(frozen=True)
class DiffusionApproxResult:
    spline: Spline
    pieces_used: int
    error_p: float
    components: dict


def _check_k(k):
    if int(k) != k or k < 1:
        raise InvalidArgumentError(f"piece count k must be >= 1, got {k}")
    return int(k)


def _check_unit(path: SampledPath, k):
    if path.t0 != 0.0 or path.t_end < 1.0 - 1e-9 * path.step:
        raise InvalidArgumentError("path must cover [0, 1]")
    end = path.index_of(1.0)
    if k > end:
        raise InvalidArgumentError(f"k={k} exceeds the {end} grid steps on [0, 1]")
    return end


def equidistant_knots(end: int, k: int) -> np.ndarray:
    """Grid indices nearest to ``j / k``, ``j = 0..k``."""
    return np.rint(np.arange(k + 1) * (end / k)).astype(np.int64)


def drift_part(path_X: SampledPath, coeff: SdeCoefficients) -> np.ndarray:
    """``Y`` on the grid by left-point quadrature of ``a(X)``."""
    ax = coeff.a(path_X.values[:-1]) * path_X.step
    return coeff.x0 + np.concatenate([[0.0], np.cumsum(ax)])


def martingale_part(path_X: SampledPath, path_W: SampledPath,
                    coeff: SdeCoefficients) -> np.ndarray:
    """``M`` on the grid by left-point Ito sums of ``b(X) dW``."""
    _check_joint(path_X, path_W)
    db = coeff.b(path_X.values[:-1]) * np.diff(path_W.values)
    return np.concatenate([[0.0], np.cumsum(db)])


def _check_joint(path_X, path_W):
    if path_X.n != path_W.n or not math.isclose(path_X.step, path_W.step):
        raise InvalidArgumentError("X and W must share one grid")


def _constant_spline(path, idx, values):
    t = path.t0 + np.asarray(idx) * path.step
    pieces = tuple(Polynomial.constant(lo, hi, v) for lo, hi, v in zip(t[:-1], t[1:], values))
    return Spline(t, pieces)


def _step_values(idx, values, end):
    """Grid values of the left-open step function with knot indices ``idx``."""
    out = np.empty(end + 1)
    out[0] = values[0]
    for j in range(len(values)):
        out[idx[j] + 1:idx[j + 1] + 1] = values[j]
    return out


def build_drift_spline(path_X: SampledPath, coeff: SdeCoefficients, k: int) -> Spline:
    """``Y((j-1)/k)`` on ``](j-1)/k, j/k]``: k constant pieces at equidistant knots."""
    k = _check_k(k)
    end = _check_unit(path_X, k)
    idx = equidistant_knots(end, k)
    Y = drift_part(path_X, coeff)
    return _constant_spline(path_X, idx, Y[idx[:-1]])


def _wiener_knots(path_W, end, k):
    restricted = SampledPath(0.0, path_W.step, path_W.values[:end + 1])
    _, idx = _gamma_search(restricted, k, 0, math.inf, 1e-4, None)
    idx = np.asarray(idx, dtype=np.int64)
    w = restricted.values
    vals = [0.5 * (w[i0:i1 + 1].max() + w[i0:i1 + 1].min()) for i0, i1 in zip(idx[:-1], idx[1:])]
    return idx, np.array(vals)


def _martingale_pieces(path_X, path_W, coeff, k, budget):
    end = _check_unit(path_X, k)
    _check_joint(path_X, path_W)
    eq = equidistant_knots(end, k)
    w_idx, w_val = _wiener_knots(path_W, end, budget)
    knots = np.union1d(eq, w_idx)
    # value on ]knots[i], knots[i+1]] is read off at the right end
    right = knots[1:]
    j = np.searchsorted(eq, right, side="left") - 1
    m = np.searchsorted(w_idx, right, side="left") - 1
    Xv, Wv = path_X.values, path_W.values
    left = eq[j]
    # R = int b(X^) dW with X^ frozen at the left equidistant knot
    owner = np.searchsorted(eq, np.arange(1, end + 1), side="left") - 1
    R = np.concatenate([[0.0], np.cumsum(coeff.b(Xv[eq[owner]]) * np.diff(Wv[:end + 1]))])
    vals = R[left] + coeff.b(Xv[left]) * (w_val[m] - Wv[left])
    return knots, vals, end


def build_martingale_spline(path_X: SampledPath, path_W: SampledPath,
                            coeff: SdeCoefficients, k: int,
                            wiener_pieces: Optional[int] = None) -> Spline:
    """``R^ + V^`` on the union of ``{j/k}`` and the free-knot Wiener knots.

    ``R^`` samples ``R = int b(X^) dW`` at ``(j-1)/k`` (``X^`` the left-point
    sampling of X) and ``V^ = b(X((j-1)/k)) (W^ - W((j-1)/k))`` with ``W^``
    the ``wiener_pieces``-piece (default k) free-knot sup-norm approximation
    of W by constants. At most ``k + wiener_pieces`` pieces.
    """
    k = _check_k(k)
    budget = k if wiener_pieces is None else _check_k(wiener_pieces)
    knots, vals, _ = _martingale_pieces(path_X, path_W, coeff, k, budget)
    return _constant_spline(path_X, knots, vals)


def grid_error(values: np.ndarray, approx: np.ndarray, step: float, p: float) -> float:
    """Discrete L_p norm of ``values - approx`` (trapezoid, grid max for p = inf)."""
    e = values - approx
    return float(K.lp_of(e, K.trapezoid_weights(e.size, step), p))


def composite_approximation(path_X: SampledPath, path_W: SampledPath,
                            coeff: SdeCoefficients, k: int, p: float = math.inf
                            ) -> DiffusionApproxResult:
    """``Y^ + M^`` with at most ``2k`` constant pieces, and its L_p error on ``[0, 1]``."""
    k = _check_k(k)
    p = check_p(p)
    m_knots, m_vals, end = _martingale_pieces(path_X, path_W, coeff, k, k)
    eq = equidistant_knots(end, k)
    Y = drift_part(path_X, coeff)
    y_vals = Y[eq[:-1]]
    knots = np.union1d(eq, m_knots)
    right = knots[1:]
    vals = (y_vals[np.searchsorted(eq, right, side="left") - 1]
            + m_vals[np.searchsorted(m_knots, right, side="left") - 1])
    h = path_X.step
    Xv = path_X.values[:end + 1]
    M = martingale_part(path_X, path_W, coeff)[:end + 1]
    comps = {"drift": grid_error(Y[:end + 1], _step_values(eq, y_vals, end), h, p),
             "martingale": grid_error(M, _step_values(m_knots, m_vals, end), h, p)}
    err = grid_error(Xv, _step_values(knots, vals, end), h, p)
    return DiffusionApproxResult(_constant_spline(path_X, knots, vals), int(knots.size - 1),
                                 err, comps)


def direct_approximation(path_X: SampledPath, k: int, p: float = math.inf,
                         r: int = 0) -> DiffusionApproxResult:
    """Free-knot spline fitted to X itself, error measured as for the composite."""
    end = _check_unit(path_X, _check_k(k))
    sub = SampledPath(0.0, path_X.step, path_X.values[:end + 1], path_X.kind)
    spline, _ = build_spline(sub, k, r, p)
    err = grid_error(sub.values, spline(sub.times), sub.step, check_p(p))
    return DiffusionApproxResult(spline, spline.k, err, {})


def _diffusion_row(i, coeff, ks, p, cfg):
    X, W = simulate_diffusion(coeff, cfg.grid_n, 1.0, RngStream(cfg.seed, i))
    out = np.empty((4, len(ks)))
    for j, k in enumerate(ks):
        a = direct_approximation(X, k, p)
        b = composite_approximation(X, W, coeff, k, p)
        out[:, j] = a.error_p, a.pieces_used, b.error_p, b.pieces_used
    return out


def diffusion_rate_study(coeff: SdeCoefficients, k_list: Sequence[int], p: float,
                         q: float, cfg: McConfig) -> StudyResult:
    """Mean error versus pieces used for (a) direct free-knot and (b) composite fits."""
    p = check_p(p)
    if not q >= 1:
        raise InvalidArgumentError(f"averaging exponent q must be >= 1, got {q}")
    ks = [_check_k(k) for k in k_list]
    if len(ks) < 3:
        raise InvalidArgumentError("a rate study needs at least 3 values of k")
    data = np.stack(run_replicates(_diffusion_row, cfg, coeff, ks, p, cfg))
    res = StudyResult("diffusion", ["k", "pieces_direct", "error_direct", "std_error_direct",
                                    "pieces_composite", "error_composite",
                                    "std_error_composite"])
    means = {}
    for name, e_row, n_row in (("direct", 0, 1), ("composite", 2, 3)):
        err = [EstimateWithError.from_samples(data[:, e_row, j] ** q).power(1.0 / q)
               for j in range(len(ks))]
        pieces = data[:, n_row, :].mean(axis=0)
        means[name] = (err, pieces)
        res.fits[f"{name}_error_vs_pieces"] = fit_loglog(pieces, [e.mean for e in err])
        res.fits[f"{name}_error_vs_k"] = fit_loglog(ks, [e.mean for e in err])
    for j, k in enumerate(ks):
        (ea, na), (eb, nb) = means["direct"], means["composite"]
        res.rows.append({"k": k, "pieces_direct": float(na[j]), "error_direct": ea[j].mean,
                         "std_error_direct": ea[j].std_error,
                         "pieces_composite": float(nb[j]), "error_composite": eb[j].mean,
                         "std_error_composite": eb[j].std_error})
    res.flags = {"sde": coeff.name, "p": p, "q": float(q), "expected_slope": -0.5}
    res.extra = {"data": data}
    return res


def _product_row(i, coeff, ks, p, cfg):
    X, _ = simulate_diffusion(coeff, cfg.grid_n, 1.0, RngStream(cfg.seed, i))
    return [K.phi_star_error(X.values, X.step, 0, cfg.grid_n, k, 1, p, 1e-4)[1] for k in ks]


def product_bound_study(coeff: SdeCoefficients, p: float, k_list: Sequence[int],
                        cfg: McConfig) -> StudyResult:
    """``(E err^p)^(1/p)`` of the k-piece piecewise-linear free-knot fit of X."""
    p = check_p(p)
    if math.isinf(p):
        raise InvalidArgumentError("the product bound needs a finite p")
    ks = [_check_k(k) for k in k_list]
    err = np.array(run_replicates(_product_row, cfg, coeff, ks, p, cfg))
    res = StudyResult("product-bound", ["k", "error", "std_error"])
    for j, k in enumerate(ks):
        est = EstimateWithError.from_samples(err[:, j] ** p).power(1.0 / p)
        res.rows.append({"k": k, "error": est.mean, "std_error": est.std_error})
        res.estimates[f"k{k}"] = est
    return res


def holder_check(coeff: SdeCoefficients, h_list: Sequence[float],
                 cfg: McConfig) -> StudyResult:
    """``E sup_[0,h] |X - x0|^2`` per h, with the ratio to h."""
    rngs = [RngStream(cfg.seed, i) for i in range(cfg.replicates)]
    X, _ = simulate_diffusion_batch(coeff, cfg.grid_n, 1.0, rngs)
    res = StudyResult("holder", ["h", "mean_sq_sup", "std_error", "ratio"])
    for h in h_list:
        m = int(round(h * cfg.grid_n))
        if m < 1 or m > cfg.grid_n:
            raise InvalidArgumentError(f"h={h} not resolvable on the grid")
        sup2 = np.max(np.abs(X[:, :m + 1] - coeff.x0), axis=1) ** 2
        est = EstimateWithError.from_samples(sup2)
        res.rows.append({"h": float(h), "mean_sq_sup": est.mean, "std_error": est.std_error,
                         "ratio": est.mean / h})
    return res


def moment_check(coeff: SdeCoefficients, q_list: Sequence[float],
                 cfg: McConfig) -> StudyResult:
    """``E ||X||_inf^q`` on ``[0, 1]`` per q."""
    rngs = [RngStream(cfg.seed, i) for i in range(cfg.replicates)]
    X, _ = simulate_diffusion_batch(coeff, cfg.grid_n, 1.0, rngs)
    sup = np.max(np.abs(X), axis=1)
    res = StudyResult("moments", ["q", "moment", "std_error"])
    for q in q_list:
        est = EstimateWithError.from_samples(sup ** q)
        res.rows.append({"q": float(q), "moment": est.mean, "std_error": est.std_error})
    return res
