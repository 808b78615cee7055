"""Monte Carlo estimation of stopping-time constants and error rates.

Every replicate draws from its own ``RngStream(cfg.seed, i)``; replicates are
processed in contiguous chunks (optionally on several joblib workers) and
reassembled in index order, so every reduction sees the same numbers in the
same order whatever the worker count.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from joblib import Parallel, delayed
from scipy.special import gammaln

from . import _kernels as K
from .core import beta as beta_exponent
from .exceptions import InvalidArgumentError
from .paths import (RngStream, SdeCoefficients, concat_paths, extend_path,
                    simulate_brownian_bridge, simulate_diffusion_batch,
                    simulate_integrated_wiener)
from .polyfit import check_p, check_r

log = logging.getLogger(__name__)

BOOTSTRAP_ROUNDS = 200
UNRELIABLE_CAP_FRACTION = 0.01


@dataclass(frozen=True)
class McConfig:
    replicates: int = 1000
    seed: int = 0
    grid_n: int = 4096
    horizon_T: float = 2.0
    horizon_cap: float = 64.0
    workers: int = 1

    def __post_init__(self):
        if int(self.replicates) != self.replicates or self.replicates < 1:
            raise InvalidArgumentError(f"replicates must be >= 1, got {self.replicates}")
        if int(self.grid_n) != self.grid_n or self.grid_n < 16:
            raise InvalidArgumentError(f"grid_n must be an integer >= 16, got {self.grid_n}")
        if not self.horizon_T > 0:
            raise InvalidArgumentError(f"horizon_T must be positive, got {self.horizon_T}")
        if not self.horizon_cap >= self.horizon_T:
            raise InvalidArgumentError(
                f"horizon_cap ({self.horizon_cap}) must be >= horizon_T ({self.horizon_T})")
        if int(self.workers) != self.workers or self.workers < 1:
            raise InvalidArgumentError(f"workers must be >= 1, got {self.workers}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise InvalidArgumentError(f"seed must be a non-negative integer, got {self.seed}")


@dataclass(frozen=True)
class EstimateWithError:
    mean: float
    std_error: float
    replicates_used: int

    @classmethod
    def from_samples(cls, x) -> "EstimateWithError":
        x = np.asarray(x, dtype=float)
        if x.size == 0:
            return cls(math.nan, math.nan, 0)
        se = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
        return cls(float(x.mean()), se, int(x.size))

    def power(self, a: float) -> "EstimateWithError":
        """``mean**a`` with a delta-method standard error."""
        m = self.mean ** a
        return EstimateWithError(m, abs(a) * self.mean ** (a - 1) * self.std_error,
                                 self.replicates_used)

    def z_against(self, other: "EstimateWithError", scale: float = 1.0) -> float:
        """z-score of ``self - scale * other`` with independent errors."""
        se = math.hypot(self.std_error, scale * other.std_error)
        diff = self.mean - scale * other.mean
        return 0.0 if diff == 0 else diff / se if se > 0 else math.copysign(math.inf, diff)


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    slope_stderr: float
    points: tuple

    def __post_init__(self):
        if len(self.points) < 3:
            raise InvalidArgumentError("a rate fit needs at least 3 points")


@dataclass
class StudyResult:
    """Table rows, named estimates and fits of one experiment.

    ``columns`` fixes the CSV column order; ``extra`` keeps raw per-replicate
    arrays for further checks and is never serialised.
    """

    name: str
    columns: list
    rows: list = field(default_factory=list)
    estimates: dict = field(default_factory=dict)
    fits: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def column(self, name) -> np.ndarray:
        return np.array([row[name] for row in self.rows], dtype=float)


def _ols(x, y):
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept)


def fit_loglog(x, y, samples: Optional[np.ndarray] = None,
               statistic: Optional[Callable] = None, seed: int = 0) -> RateFit:
    """OLS fit of ``log y`` against ``log x``.

    With ``samples`` (replicates x points) and ``statistic`` mapping a
    resampled block to the ``y`` values, the slope error comes from a
    replicate bootstrap; otherwise from the OLS residual variance.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 3 or x.size != y.size:
        raise InvalidArgumentError(f"a log-log fit needs >= 3 paired points, got {x.size}")
    if np.any(x <= 0) or np.any(y <= 0):
        raise InvalidArgumentError("log-log fit needs positive data")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = _ols(lx, ly)
    if samples is not None:
        rng = np.random.default_rng([int(seed), 0xB007])
        n = samples.shape[0]
        slopes = np.empty(BOOTSTRAP_ROUNDS)
        for b in range(BOOTSTRAP_ROUNDS):
            yb = statistic(samples[rng.integers(0, n, n)])
            slopes[b] = _ols(lx, np.log(yb))[0]
        se = float(slopes.std(ddof=1))
    else:
        resid = ly - (slope * lx + intercept)
        dof = x.size - 2
        sxx = np.sum((lx - lx.mean()) ** 2)
        se = float(math.sqrt(np.sum(resid ** 2) / dof / sxx)) if dof > 0 else 0.0
    return RateFit(slope, intercept, se, tuple(zip(lx.tolist(), ly.tolist())))


def _chunks(n, workers):
    size = max(1, math.ceil(n / (4 * workers))) if workers > 1 else n
    return [range(i, min(n, i + size)) for i in range(0, n, size)]


def run_replicates(task: Callable, cfg: McConfig, *args) -> list:
    """``[task(i, *args) for i in range(cfg.replicates)]``, possibly in parallel."""
    chunks = _chunks(cfg.replicates, cfg.workers)
    if cfg.workers == 1:
        return [task(i, *args) for i in range(cfg.replicates)]
    parts = Parallel(n_jobs=cfg.workers)(delayed(_run_chunk)(task, c, args) for c in chunks)
    return [item for part in parts for item in part]


def _run_chunk(task, indices, args):
    return [task(i, *args) for i in indices]


def _check_rs(r, s):
    r = check_r(r)
    if int(s) != s or s < 0:
        raise InvalidArgumentError(f"integration order s must be >= 0, got {s}")
    if r < s:
        raise InvalidArgumentError(f"approximating W^({s}) needs r >= s, got r={r}")
    return r, int(s)


# -- stopping times -------------------------------------------------------


def _first_stops(i, s, r, p, eps, count, cfg, time_scale):
    """First ``count`` stopping times (times, not indices) of one replicate.

    The horizon doubles via :func:`extend_path` until ``count`` stops are
    found; returns ``(times, capped)`` with ``times`` truncated if capped.
    """
    rng = RngStream(cfg.seed, i)
    h = time_scale / cfg.grid_n
    n = max(1, int(round(cfg.horizon_T * cfg.grid_n)))
    cap = cfg.horizon_cap * time_scale
    levels, state = simulate_integrated_wiener(s, n, n * h, rng)
    path = levels[s]
    taus = np.empty(count + 1, dtype=np.int64)
    empty = np.empty(0, dtype=np.int64)
    while True:
        got = K.schedule(path.values, path.step, 0, path.n, eps, r, p, count,
                         empty, empty, taus)
        if got == count:
            return taus[1:] * h, False
        if path.t_end >= cap * (1 - 1e-12):
            return taus[1:got + 1] * h, True
        more = min(path.n, int(round((cap - path.t_end) / h)))
        new, state = extend_path(state, more, more * h, rng)
        path = concat_paths(path, new[s])


def estimate_tau(r: int, s: int, p: float, cfg: McConfig, epsilon: float = 1.0,
                 time_scale: float = 1.0) -> StudyResult:
    """Expected first stopping time of ``W^(s)`` at threshold ``epsilon``.

    ``time_scale`` stretches the grid step and horizons (step
    ``time_scale / grid_n``); choosing ``epsilon ** (1 / beta)`` makes runs at
    different thresholds statistically comparable grid point for grid point.
    Capped replicates are excluded from the mean; more than 1% capped flags
    the estimate unreliable.
    """
    r, s = _check_rs(r, s)
    p = check_p(p)
    if not epsilon > 0:
        raise InvalidArgumentError(f"threshold must be positive, got {epsilon}")
    out = run_replicates(_first_stops, cfg, s, r, p, float(epsilon), 1, cfg,
                         float(time_scale))
    capped = sum(c for _, c in out)
    taus = np.array([t[0] for t, c in out if not c])
    est = EstimateWithError.from_samples(taus)
    b = beta_exponent(s, p)
    c_est = est.power(-b)
    reliable = capped <= UNRELIABLE_CAP_FRACTION * cfg.replicates
    if not reliable:
        log.warning("%d of %d replicates hit the horizon cap", capped, cfg.replicates)
    res = StudyResult("tau", ["epsilon", "mean_tau", "std_error", "replicates_used",
                              "capped", "c", "c_std_error"])
    res.rows.append({"epsilon": float(epsilon), "mean_tau": est.mean,
                     "std_error": est.std_error, "replicates_used": est.replicates_used,
                     "capped": int(capped), "c": c_est.mean, "c_std_error": c_est.std_error})
    res.estimates = {"tau": est, "c": c_est}
    res.flags = {"reliable": bool(reliable), "capped": int(capped)}
    res.extra = {"samples": taus}
    return res


def tau_scaling_check(r: int, s: int, p: float, epsilons: Sequence[float],
                      cfg: McConfig) -> StudyResult:
    """Compare ``E tau_eps`` with ``eps^(1/beta) * E tau_1``.

    Each threshold runs on a grid stretched by ``eps^(1/beta)`` and with its
    own seed offset so the estimates are independent.
    """
    b = beta_exponent(s, check_p(p))
    base = estimate_tau(r, s, p, cfg).estimates["tau"]
    res = StudyResult("tau-scaling", ["epsilon", "mean_tau", "std_error", "predicted",
                                      "predicted_std_error", "ratio", "z"])
    for j, eps in enumerate(epsilons, start=1):
        scale = eps ** (1.0 / b)
        sub = McConfig(cfg.replicates, cfg.seed + 7919 * j, cfg.grid_n, cfg.horizon_T,
                       cfg.horizon_cap, cfg.workers)
        est = estimate_tau(r, s, p, sub, epsilon=eps, time_scale=scale).estimates["tau"]
        res.rows.append({"epsilon": float(eps), "mean_tau": est.mean,
                         "std_error": est.std_error, "predicted": scale * base.mean,
                         "predicted_std_error": scale * base.std_error,
                         "ratio": est.mean / (scale * base.mean),
                         "z": est.z_against(base, scale)})
        res.estimates[f"tau_{eps:g}"] = est
    res.estimates["tau_1"] = base
    return res


def xi_structure_check(r: int, s: int, p: float, epsilon: float, j_max: int,
                       cfg: McConfig) -> StudyResult:
    """Spacings ``xi_j = tau_j - tau_{j-1}``, ``j <= j_max``: correlation and per-j means."""
    r, s = _check_rs(r, s)
    p = check_p(p)
    if int(j_max) != j_max or j_max < 1:
        raise InvalidArgumentError(f"j_max must be >= 1, got {j_max}")
    out = run_replicates(_first_stops, cfg, s, r, p, float(epsilon), int(j_max), cfg, 1.0)
    capped = sum(c for _, c in out)
    xi = np.array([np.diff(np.concatenate([[0.0], t])) for t, c in out if not c])
    xi = xi.reshape(-1, int(j_max))
    res = StudyResult("xi-check", ["j", "mean_xi", "std_error", "replicates_used"])
    means = []
    for j in range(int(j_max)):
        est = EstimateWithError.from_samples(xi[:, j])
        means.append(est)
        res.rows.append({"j": j + 1, "mean_xi": est.mean, "std_error": est.std_error,
                         "replicates_used": est.replicates_used})
    zmax = 0.0
    for a in range(len(means)):
        for b in range(a + 1, len(means)):
            zmax = max(zmax, abs(means[a].z_against(means[b])))
    corr = None
    if j_max > 1:
        x, y = xi[:, :-1].ravel(), xi[:, 1:].ravel()
        corr = float(np.corrcoef(x, y)[0, 1])
    res.estimates = {"xi": EstimateWithError.from_samples(xi.ravel())}
    res.flags = {"lag1_correlation": corr, "correlation_bound": 3.0 / math.sqrt(xi.size),
                 "max_pairwise_z": zmax, "spacings": int(xi.size), "capped": int(capped),
                 "reliable": capped <= UNRELIABLE_CAP_FRACTION * cfg.replicates}
    res.extra = {"xi": xi}
    return res


# -- rates -----------------------------------------------------------------


def b_constant(s: int, p: float) -> float:
    """``(s+1/2)^(s+1/2) * p^(-1/p) * beta^(-beta)``; equals 1 for ``p = inf``."""
    p = check_p(p)
    if math.isinf(p):
        return 1.0
    a = s + 0.5
    b = beta_exponent(s, p)
    return math.exp(a * math.log(a) - math.log(p) / p - b * math.log(b))


def _phi_star_row(i, s, r, p, k_list, cfg):
    rng = RngStream(cfg.seed, i)
    levels, _ = simulate_integrated_wiener(s, cfg.grid_n, 1.0, rng)
    f = levels[s].values
    h = levels[s].step
    out = np.empty((2, len(k_list)))
    for j, k in enumerate(k_list):
        g, e, _ = K.phi_star_error(f, h, 0, cfg.grid_n, int(k), r, p, 1e-4)
        out[0, j] = e
        out[1, j] = g
    return out


def _q_mean(block, q):
    return np.mean(block ** q, axis=0) ** (1.0 / q)


def _check_k_list(k_list):
    ks = [int(k) for k in k_list]
    if any(k < 1 for k in ks) or len(set(ks)) != len(ks):
        raise InvalidArgumentError("k values must be distinct positive integers")
    return ks


def rate_study(s: int, r: int, p: float, k_list: Sequence[int], cfg: McConfig,
               q: float = 1.0) -> StudyResult:
    """Error of the k-piece free-knot spline on ``W^(s)`` over ``[0, 1]`` versus k."""
    r, s = _check_rs(r, s)
    p = check_p(p)
    if not q >= 1:
        raise InvalidArgumentError(f"averaging exponent q must be >= 1, got {q}")
    ks = _check_k_list(k_list)
    if len(ks) < 3:
        raise InvalidArgumentError("a rate study needs at least 3 values of k")
    data = np.stack(run_replicates(_phi_star_row, cfg, s, r, p, ks, cfg))
    err, gam = data[:, 0, :], data[:, 1, :]
    b = beta_exponent(s, p)
    res = StudyResult("rate", ["k", "mean_error", "std_error", "mean_gamma",
                               "k_pow_beta_times_error", "k_pow_rate_times_error",
                               "k_pow_beta_times_gamma"])
    qmeans = _q_mean(err, q)
    for j, k in enumerate(ks):
        m = EstimateWithError.from_samples(err[:, j] ** q).power(1.0 / q)
        g = EstimateWithError.from_samples(gam[:, j])
        res.rows.append({"k": k, "mean_error": float(qmeans[j]), "std_error": m.std_error,
                         "mean_gamma": g.mean,
                         "k_pow_beta_times_error": float(k ** b * qmeans[j]),
                         "k_pow_rate_times_error": float(k ** (s + 0.5) * qmeans[j]),
                         "k_pow_beta_times_gamma": k ** b * g.mean})
        res.estimates[f"error_k{k}"] = m
        res.estimates[f"gamma_k{k}"] = g
    res.fits["error_vs_k"] = fit_loglog(ks, qmeans, err, lambda blk: _q_mean(blk, q),
                                        cfg.seed)
    res.flags = {"expected_slope": -(s + 0.5), "q": float(q)}
    res.extra = {"errors": err, "gammas": gam, "k": np.array(ks)}
    return res


def _eps_row(i, s, r, p, eps_list, cfg):
    rng = RngStream(cfg.seed, i)
    levels, _ = simulate_integrated_wiener(s, cfg.grid_n, 1.0, rng)
    f, h = levels[s].values, levels[s].step
    out = np.empty((2, len(eps_list)))
    for j, eps in enumerate(eps_list):
        e, m = K.eps_spline_error(f, h, 0, cfg.grid_n, float(eps), r, p)
        out[0, j] = e
        out[1, j] = m
    return out


def avg_knot_rate_study(r: int, s: int, p: float, epsilon_list: Sequence[float],
                        cfg: McConfig) -> StudyResult:
    """Variable-knot splines at thresholds ``epsilon_list``: error versus mean piece count."""
    r, s = _check_rs(r, s)
    p = check_p(p)
    eps = [float(e) for e in epsilon_list]
    if len(eps) < 3:
        raise InvalidArgumentError("a rate fit needs at least 3 thresholds")
    if any(e <= 0 for e in eps):
        raise InvalidArgumentError("thresholds must be positive")
    data = np.stack(run_replicates(_eps_row, cfg, s, r, p, eps, cfg))
    err, pieces = data[:, 0, :], data[:, 1, :]
    res = StudyResult("avg-knots", ["epsilon", "mean_pieces", "pieces_std_error",
                                    "mean_error", "std_error"])
    for j, e in enumerate(eps):
        pc = EstimateWithError.from_samples(pieces[:, j])
        er = EstimateWithError.from_samples(err[:, j])
        res.rows.append({"epsilon": e, "mean_pieces": pc.mean,
                         "pieces_std_error": pc.std_error, "mean_error": er.mean,
                         "std_error": er.std_error})
    both = np.concatenate([err, pieces], axis=1)
    m = len(eps)
    # x varies with the resample too, so bootstrap the slope by hand
    res.fits["error_vs_pieces"] = _fit_xy_bootstrap(both, m, cfg.seed)
    res.fits["pieces_vs_epsilon"] = fit_loglog(eps, pieces.mean(axis=0))
    res.flags = {"expected_slope": -(s + 0.5)}
    res.extra = {"errors": err, "pieces": pieces}
    return res


def _fit_xy_bootstrap(both, m, seed):
    x = both[:, m:].mean(axis=0)
    y = both[:, :m].mean(axis=0)
    fit = fit_loglog(x, y)
    rng = np.random.default_rng([int(seed), 0xB007])
    n = both.shape[0]
    slopes = np.empty(BOOTSTRAP_ROUNDS)
    for b in range(BOOTSTRAP_ROUNDS):
        blk = both[rng.integers(0, n, n)].mean(axis=0)
        slopes[b] = _ols(np.log(blk[m:]), np.log(blk[:m]))[0]
    return RateFit(fit.slope, fit.intercept, float(slopes.std(ddof=1)), fit.points)


# -- negative moments, small balls, bridge constants ----------------------


def negative_moment_study(sampler: Callable, alpha: float, k_list: Sequence[int],
                          cfg: McConfig) -> StudyResult:
    """``E (mean of k draws)^(-alpha)`` per k.

    ``sampler(generator, size)`` must return strictly positive draws;
    replicate i uses ``RngStream(cfg.seed, i)``.
    """
    if not alpha > 0:
        raise InvalidArgumentError(f"alpha must be positive, got {alpha}")
    ks = _check_k_list(k_list)
    vals = np.stack(run_replicates(_negmom_row, cfg, sampler, float(alpha), ks, cfg))
    res = StudyResult("negmom", ["k", "estimate", "std_error", "replicates_used"])
    for j, k in enumerate(ks):
        est = EstimateWithError.from_samples(vals[:, j])
        res.rows.append({"k": k, "estimate": est.mean, "std_error": est.std_error,
                         "replicates_used": est.replicates_used})
        res.estimates[f"k{k}"] = est
    res.extra = {"values": vals}
    return res


def _negmom_row(i, sampler, alpha, ks, cfg):
    gen = RngStream(cfg.seed, i).generator
    out = np.empty(len(ks))
    for j, k in enumerate(ks):
        x = np.asarray(sampler(gen, k), dtype=float)
        if x.shape != (k,) or not np.all(x > 0):
            raise InvalidArgumentError("sampler must return k strictly positive values")
        out[j] = np.mean(x) ** (-alpha)
    return out


def exponential_sampler(gen, size):
    return gen.standard_exponential(size)


def gamma_negative_moment(k: int, alpha: float) -> float:
    """Exact ``E S_k^(-alpha)`` for the mean of k i.i.d. Exp(1) variables."""
    if not k > alpha:
        raise InvalidArgumentError("the moment is finite only for k > alpha")
    return math.exp(alpha * math.log(k) + gammaln(k - alpha) - gammaln(k))


def _smalldev_row(i, s, r, p, cfg):
    rng = RngStream(cfg.seed, i)
    levels, _ = simulate_integrated_wiener(s, cfg.grid_n, 1.0, rng)
    f, h = levels[s].values, levels[s].step
    d = K.segment_delta(f, h, 0, cfg.grid_n, r, p)
    w = K.trapezoid_weights(f.size, h)
    return d, K.lp_of(f, w, p)


def small_deviation_study(r: int, s: int, p: float, epsilon_list: Sequence[float],
                          cfg: McConfig) -> StudyResult:
    """Small-ball probabilities of the distance from ``W^(s)`` to degree-r polynomials.

    Fits ``log(-log P)`` against ``log(1/eps)``; thresholds whose event is
    never (or always) observed are dropped with a warning. Also reports
    ``P(||W^(s)|| <= eps)`` and the polynomial-dimension bound on the
    distance probability.
    """
    r, s = _check_rs(r, s)
    p = check_p(p)
    eps = sorted(float(e) for e in epsilon_list)
    if any(e <= 0 for e in eps):
        raise InvalidArgumentError("thresholds must be positive")
    data = np.array(run_replicates(_smalldev_row, cfg, s, r, p, cfg))
    dist, norm = data[:, 0], data[:, 1]
    n = dist.size
    res = StudyResult("smalldev", ["epsilon", "prob", "prob_std_error", "hits",
                                   "prob_norm", "dimension_bound"])
    keep_x, keep_y = [], []
    for e in eps:
        hits = int(np.sum(dist <= e))
        prob = hits / n
        pn = float(np.mean(norm <= e))
        lam = 1.0 / e
        bound = (4 * lam / e) ** (r + 1) * float(np.mean(norm <= 2 * e)) \
            + float(np.mean(norm >= lam - e))
        res.rows.append({"epsilon": e, "prob": prob,
                         "prob_std_error": math.sqrt(prob * (1 - prob) / n),
                         "hits": hits, "prob_norm": pn, "dimension_bound": bound})
        if 0 < hits < n:
            keep_x.append(1.0 / e)
            keep_y.append(-math.log(prob))
        else:
            log.warning("threshold %g has %d of %d hits; dropped from the fit", e, hits, n)
    if len(keep_x) >= 3:
        res.fits["neglog_prob_vs_inv_eps"] = fit_loglog(keep_x, keep_y)
    res.flags = {"expected_slope": 1.0 / (s + 0.5), "points_used": len(keep_x)}
    res.extra = {"distance": dist, "norm": norm}
    return res


def _bridge_row(i, p, cfg):
    b = simulate_brownian_bridge(cfg.grid_n, RngStream(cfg.seed, i))
    w = K.trapezoid_weights(b.values.size, b.step)
    return K.lp_of(b.values, w, p) ** p


def _kappa_chunk(idx, coeff, p1, p2, cfg):
    rngs = [RngStream(cfg.seed, i) for i in idx]
    X, _ = simulate_diffusion_batch(coeff, cfg.grid_n, 1.0, rngs)
    bx = np.abs(coeff.b(X))
    w = K.trapezoid_weights(X.shape[1], 1.0 / cfg.grid_n)
    return list((bx ** p1 @ w) ** (p2 / p1))


def estimate_eta_kappa(p: float, p1: float, p2: float, coeff: SdeCoefficients,
                       cfg: McConfig) -> StudyResult:
    """``eta(p)`` from Brownian bridges and ``kappa(p1, p2)`` from diffusion paths."""
    for name, v in (("p", p), ("p1", p1), ("p2", p2)):
        if math.isinf(check_p(v)):
            raise InvalidArgumentError(f"{name} must be finite")
    m = EstimateWithError.from_samples(run_replicates(_bridge_row, cfg, float(p), cfg))
    eta = m.power(1.0 / p)
    block = 256
    vals = []
    for start in range(0, cfg.replicates, block):
        vals.extend(_kappa_chunk(range(start, min(cfg.replicates, start + block)),
                                 coeff, float(p1), float(p2), cfg))
    kappa = EstimateWithError.from_samples(vals).power(1.0 / p2)
    res = StudyResult("eta-kappa", ["quantity", "estimate", "std_error", "replicates_used"])
    for name, est in (("eta", eta), ("kappa", kappa)):
        res.rows.append({"quantity": name, "estimate": est.mean, "std_error": est.std_error,
                         "replicates_used": est.replicates_used})
        res.estimates[name] = est
    res.flags = {"p": float(p), "p1": float(p1), "p2": float(p2), "sde": coeff.name}
    return res


def gamma_iqr(gammas: np.ndarray, k_list: Sequence[int], s: int, p: float) -> np.ndarray:
    """Cross-path interquartile range of ``k^beta * gamma_k`` for each k."""
    b = beta_exponent(s, check_p(p))
    scaled = gammas * np.asarray(k_list, dtype=float) ** b
    q75, q25 = np.percentile(scaled, [75, 25], axis=0)
    return q75 - q25
