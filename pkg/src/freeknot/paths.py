"""Reproducible simulation of Wiener-type trajectories on uniform grids.

The s-fold integrated Wiener process is propagated exactly: over a step of
length ``h`` the vector ``(W, W^(1), ..., W^(s))`` moves by a Taylor shift of
the current levels plus an independent centred Gaussian vector whose
covariance is ``h^(a+b+1) / (a! b! (a+b+1))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from numba import njit

from .exceptions import InvalidArgumentError, NumericFailure, OutOfRangeError

MAX_ORDER = 4


@dataclass(frozen=True)
class SampledPath:
    """Trajectory sampled at ``t0 + i * step``, ``i = 0..n``."""

    t0: float
    step: float
    values: np.ndarray
    kind: str = "synthetic"

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=float)
        if not self.step > 0:
            raise InvalidArgumentError(f"step must be positive, got {self.step}")
        if values.ndim != 1 or values.size < 1:
            raise InvalidArgumentError("values must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError("path values must be finite")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.size - 1

    @property
    def t_end(self) -> float:
        return self.t0 + self.n * self.step

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.n + 1) * self.step

    def index_of(self, t: float) -> int:
        """Grid index of time ``t``, snapped to the nearest grid point."""
        x = (t - self.t0) / self.step
        if not np.isfinite(x) or x < -1e-9 or x > self.n + 1e-9:
            raise OutOfRangeError(
                f"t={t} outside path domain [{self.t0}, {self.t_end}]")
        return int(min(max(round(x), 0), self.n))

    def restrict(self, u: float, v: float) -> "SampledPath":
        i, j = self.index_of(u), self.index_of(v)
        return SampledPath(self.t0 + i * self.step, self.step,
                           self.values[i:j + 1], self.kind)


def concat_paths(first: SampledPath, second: SampledPath) -> SampledPath:
    """Join two paths where ``second`` starts at the last point of ``first``."""
    if not math.isclose(first.step, second.step, rel_tol=1e-12):
        raise InvalidArgumentError("paths have different grid steps")
    if not math.isclose(first.t_end, second.t0, rel_tol=1e-12, abs_tol=1e-12):
        raise InvalidArgumentError("second path does not start where first ends")
    values = np.concatenate([first.values, second.values[1:]])
    return SampledPath(first.t0, first.step, values, first.kind)


@dataclass(frozen=True)
class IwpState:
    """Levels ``(W(z), W^(1)(z), ..., W^(s)(z))`` at time ``z``."""

    z: float
    levels: np.ndarray

    def __post_init__(self):
        levels = np.array(self.levels, dtype=float)
        if levels.ndim != 1 or not np.all(np.isfinite(levels)):
            raise InvalidArgumentError("levels must be a finite 1-d array")
        levels.flags.writeable = False
        object.__setattr__(self, "levels", levels)

    @property
    def s(self) -> int:
        return self.levels.size - 1


@dataclass
class RngStream:
    """Counter-based (Philox) random stream keyed by ``(seed, stream_id)``.

    The stream is stateful: successive simulations drawing from the same
    object continue where the previous one stopped.
    """

    seed: int
    stream_id: int = 0
    generator: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id),))
        self.generator = np.random.Generator(np.random.Philox(ss))

    def fresh(self) -> "RngStream":
        return RngStream(self.seed, self.stream_id)

    def normal(self, size) -> np.ndarray:
        return self.generator.standard_normal(size)


@dataclass(frozen=True)
class SdeCoefficients:
    """Scalar SDE ``dX = a(X) dt + b(X) dW``, ``X(0) = x0``.

    ``a`` and ``b`` should accept numpy arrays. ``db`` (derivative of ``b``)
    is only needed for the Milstein scheme.
    """

    a: Callable
    b: Callable
    x0: float = 0.0
    db: Optional[Callable] = None
    name: str = "custom"

    def __post_init__(self):
        b0 = float(np.asarray(self.b(np.array([self.x0])))[0])
        if b0 == 0.0 or not np.isfinite(b0):
            raise InvalidArgumentError("diffusion coefficient must satisfy b(x0) != 0")


def _check_nT(n, T):
    if int(n) != n or n < 1:
        raise InvalidArgumentError(f"step count must be a positive integer, got {n}")
    if not T > 0:
        raise InvalidArgumentError(f"horizon must be positive, got {T}")


def iwp_covariance(s: int, h: float) -> np.ndarray:
    a = np.arange(s + 1)
    fact = np.array([math.factorial(i) for i in a], dtype=float)
    e = a[:, None] + a[None, :] + 1
    return h ** e / (fact[:, None] * fact[None, :] * e)


@lru_cache(maxsize=64)
def iwp_factor(s: int, h: float) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L.T == iwp_covariance(s, h)``.

    Factorises the scale-free Hilbert part so the result is accurate for
    any step size.
    """
    a = np.arange(s + 1)
    hilbert = 1.0 / (a[:, None] + a[None, :] + 1)
    try:
        chol = np.linalg.cholesky(hilbert)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - s <= 4 is fine
        raise NumericFailure(f"covariance factorisation failed for s={s}") from exc
    scale = np.array([h ** (i + 0.5) / math.factorial(i) for i in a])
    L = scale[:, None] * chol
    if not np.all(np.isfinite(L)):
        raise NumericFailure(f"degenerate step size h={h} for s={s}")
    L.flags.writeable = False
    return L


def taylor_shift(s: int, h: float) -> np.ndarray:
    A = np.zeros((s + 1, s + 1))
    for lvl in range(s + 1):
        for i in range(lvl + 1):
            A[lvl, lvl - i] = h ** i / math.factorial(i)
    return A


@njit(cache=True)
def _propagate(start, A, L, Z):
    n, m = Z.shape
    out = np.empty((n + 1, m))
    out[0] = start
    for i in range(n):
        for a in range(m):
            acc = 0.0
            for b in range(a + 1):
                acc += A[a, b] * out[i, b]
            noise = 0.0
            for b in range(a + 1):
                noise += L[a, b] * Z[i, b]
            out[i + 1, a] = acc + noise
    return out


def _kind(s):
    return "wiener" if s == 0 else f"integrated-wiener({s})"


def _advance(state: IwpState, n: int, T: float, rng: RngStream):
    s = state.s
    h = T / n
    Z = rng.normal((n, s + 1))
    out = _propagate(state.levels, taylor_shift(s, h), iwp_factor(s, h), Z)
    paths = [SampledPath(state.z, h, out[:, lvl], _kind(lvl)) for lvl in range(s + 1)]
    return paths, IwpState(state.z + T, out[-1])


def simulate_integrated_wiener(s: int, n: int, T: float, rng: RngStream):
    """Simulate ``W^(0), ..., W^(s)`` on ``[0, T]`` with ``n`` exact steps.

    Returns ``(levels, state)`` where ``levels[i]`` is the path of ``W^(i)``.
    """
    if int(s) != s or s < 0 or s > MAX_ORDER:
        raise InvalidArgumentError(f"order s must be in 0..{MAX_ORDER}, got {s}")
    _check_nT(n, T)
    return _advance(IwpState(0.0, np.zeros(int(s) + 1)), int(n), float(T), rng)


def extend_path(state: IwpState, extra_n: int, extra_T: float, rng: RngStream,
                s: Optional[int] = None):
    """Continue a simulation from ``state``.

    Returned levels start at ``state.z`` (first value = the state's level),
    so :func:`concat_paths` joins them onto the earlier trajectory.
    """
    if s is not None and s != state.s:
        raise InvalidArgumentError(
            f"state carries order s={state.s} but s={s} was requested")
    if extra_n == 0:
        return [], state
    _check_nT(extra_n, extra_T)
    return _advance(state, int(extra_n), float(extra_T), rng)


def simulate_wiener(n: int, T: float, rng: RngStream) -> SampledPath:
    levels, _ = simulate_integrated_wiener(0, n, T, rng)
    return levels[0]


def simulate_brownian_bridge(n: int, rng: RngStream) -> SampledPath:
    _check_nT(n, 1.0)
    w = simulate_wiener(n, 1.0, rng).values
    t = np.arange(n + 1) / n
    return SampledPath(0.0, 1.0 / n, w - t * w[-1], "bridge")


def euler_batch(coeff: SdeCoefficients, dW: np.ndarray, h: float,
                scheme: str = "euler") -> np.ndarray:
    """Integrate many paths at once; ``dW`` has shape ``(replicates, n)``."""
    if scheme not in ("euler", "milstein"):
        raise InvalidArgumentError(f"unknown scheme {scheme!r}")
    if scheme == "milstein" and coeff.db is None:
        raise InvalidArgumentError("milstein scheme needs the derivative db")
    reps, n = dW.shape
    X = np.empty((reps, n + 1))
    X[:, 0] = coeff.x0
    x = X[:, 0].copy()
    for i in range(n):
        bx = coeff.b(x)
        x = x + coeff.a(x) * h + bx * dW[:, i]
        if scheme == "milstein":
            x = x + 0.5 * bx * coeff.db(X[:, i]) * (dW[:, i] ** 2 - h)
        if not np.all(np.isfinite(x)):
            raise NumericFailure(f"non-finite diffusion value at step {i + 1}",
                                 step=i + 1)
        X[:, i + 1] = x
    return X


def simulate_diffusion(coeff: SdeCoefficients, n: int, T: float, rng: RngStream,
                       scheme: str = "euler"):
    """Euler (default) or Milstein path of the SDE plus its driving Wiener path."""
    _check_nT(n, T)
    W = simulate_wiener(n, T, rng)
    X = euler_batch(coeff, np.diff(W.values)[None, :], W.step, scheme)[0]
    return SampledPath(0.0, W.step, X, "diffusion"), W


def simulate_diffusion_batch(coeff: SdeCoefficients, n: int, T: float,
                             rngs: Sequence[RngStream], scheme: str = "euler"):
    """Vectorised :func:`simulate_diffusion`; row ``i`` uses ``rngs[i]``.

    Row ``i`` is identical to ``simulate_diffusion(coeff, n, T, rngs[i])``.
    """
    _check_nT(n, T)
    W = np.stack([simulate_wiener(n, T, r).values for r in rngs])
    X = euler_batch(coeff, np.diff(W, axis=1), T / n, scheme)
    return X, W


def _const(c):
    return lambda x: np.full_like(np.asarray(x, dtype=float), c)


SDE_PRESETS = {
    "wiener": lambda: SdeCoefficients(_const(0.0), _const(1.0), 0.0, _const(0.0),
                                      name="wiener"),
    "ou-sine": lambda: SdeCoefficients(lambda x: -x, lambda x: 1 + 0.1 * np.sin(x),
                                       0.0, lambda x: 0.1 * np.cos(x), name="ou-sine"),
    "mean-tanh": lambda: SdeCoefficients(
        lambda x: 1 - x, lambda x: 0.5 + 0.2 * np.tanh(x), 0.0,
        lambda x: 0.2 / np.cosh(x) ** 2, name="mean-tanh"),
}


def sde_preset(name: str) -> SdeCoefficients:
    try:
        return SDE_PRESETS[name]()
    except KeyError:
        raise InvalidArgumentError(
            f"unknown SDE preset {name!r}; choose from {sorted(SDE_PRESETS)}") from None
