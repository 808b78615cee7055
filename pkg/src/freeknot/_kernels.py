"""Compiled inner loops: per-interval best polynomial fits and knot search.

All routines work on grid indices of a uniformly sampled path ``f`` with
spacing ``h``. A fit over indices ``i0..i1`` uses the Legendre basis in the
variable ``x = 2 (i - i0) / (i1 - i0) - 1`` and trapezoid weights, so the
returned error is the discretised ``L_p[t_i0, t_i1]`` norm of the residual.
``p = inf`` selects the grid maximum.
"""

import math

import numpy as np
from numba import njit

MAX_IRLS = 200
MAX_EXCHANGE = 200
IRLS_FLOOR = 1e-12
P1_SMOOTHING = 1e-8
# relative coefficient step at which reweighting stops; the p = 1 smoothing
# leaves steps of order 1e-12 * scale that never shrink further
IRLS_STEP_TOL = 1e-10
OBJ_STALL_TOL = 1e-10
L1_WARM_STEPS = 8

OK = 0
NOT_CONVERGED = 1


@njit(cache=True)
def legendre_matrix(x, r):
    m = x.size
    B = np.empty((m, r + 1))
    for i in range(m):
        B[i, 0] = 1.0
        if r >= 1:
            B[i, 1] = x[i]
        for k in range(1, r):
            B[i, k + 1] = ((2 * k + 1) * x[i] * B[i, k] - k * B[i, k - 1]) / (k + 1)
    return B


@njit(cache=True)
def grid_x(m):
    x = np.empty(m)
    if m == 1:
        x[0] = -1.0
        return x
    for i in range(m):
        x[i] = -1.0 + 2.0 * i / (m - 1)
    return x


@njit(cache=True)
def trapezoid_weights(m, h):
    w = np.full(m, h)
    if m == 1:
        w[0] = 0.0
    else:
        w[0] = 0.5 * h
        w[m - 1] = 0.5 * h
    return w


@njit(cache=True)
def lp_of(e, w, p):
    if math.isinf(p):
        best = 0.0
        for i in range(e.size):
            a = abs(e[i])
            if a > best:
                best = a
        return best
    acc = 0.0
    for i in range(e.size):
        acc += w[i] * abs(e[i]) ** p
    return acc ** (1.0 / p)


@njit(cache=True)
def _weighted_lsq(B, y, w):
    n = B.shape[1]
    G = np.zeros((n, n))
    b = np.zeros(n)
    for i in range(B.shape[0]):
        for a in range(n):
            wa = w[i] * B[i, a]
            b[a] += wa * y[i]
            for c in range(a, n):
                G[a, c] += wa * B[i, c]
    for a in range(n):
        for c in range(a):
            G[a, c] = G[c, a]
    return np.linalg.solve(G, b)


@njit(cache=True)
def _residual(B, y, c):
    e = y.copy()
    for i in range(B.shape[0]):
        acc = 0.0
        for a in range(c.size):
            acc += B[i, a] * c[a]
        e[i] -= acc
    return e


@njit(cache=True)
def _remez(B, y, r, coef):
    """Discrete minimax fit by single-point exchange on the grid."""
    m = y.size
    n = r + 2
    ref = np.empty(n, dtype=np.int64)
    for j in range(n):
        ref[j] = int(round((m - 1) * 0.5 * (1.0 - math.cos(math.pi * j / (n - 1)))))
    for j in range(1, n):
        if ref[j] <= ref[j - 1]:
            ref[j] = ref[j - 1] + 1
    for j in range(n - 1, -1, -1):
        hi = m - n + j
        if ref[j] > hi:
            ref[j] = hi
    scale = 0.0
    for i in range(m):
        if abs(y[i]) > scale:
            scale = abs(y[i])
    tol = 1e-13 * (scale + 1e-300)
    M = np.empty((n, n))
    rhs = np.empty(n)
    best_err = np.inf
    best_coef = np.zeros(r + 1)
    status = NOT_CONVERGED
    it = 0
    for it in range(1, MAX_EXCHANGE + 1):
        for j in range(n):
            for a in range(r + 1):
                M[j, a] = B[ref[j], a]
            M[j, r + 1] = 1.0 if j % 2 == 0 else -1.0
            rhs[j] = y[ref[j]]
        sol = np.linalg.solve(M, rhs)
        lev = sol[r + 1]
        c = sol[:r + 1]
        e = _residual(B, y, c)
        istar = 0
        emax = -1.0
        for i in range(m):
            if abs(e[i]) > emax:
                emax = abs(e[i])
                istar = i
        if emax < best_err:
            best_err = emax
            best_coef[:] = c
        if emax <= abs(lev) + tol:
            status = OK
            break
        sgn = 1.0 if e[istar] > 0 else -1.0
        lsign = 1.0 if lev >= 0 else -1.0
        if istar < ref[0]:
            if sgn == lsign:
                ref[0] = istar
            else:
                for j in range(n - 1, 0, -1):
                    ref[j] = ref[j - 1]
                ref[0] = istar
        elif istar > ref[n - 1]:
            s_last = lsign if (n - 1) % 2 == 0 else -lsign
            if sgn == s_last:
                ref[n - 1] = istar
            else:
                for j in range(n - 1):
                    ref[j] = ref[j + 1]
                ref[n - 1] = istar
        else:
            for j in range(n - 1):
                if ref[j] < istar < ref[j + 1]:
                    sj = lsign if j % 2 == 0 else -lsign
                    if sgn == sj:
                        ref[j] = istar
                    else:
                        ref[j + 1] = istar
                    break
            else:
                # istar already in the reference: rounding-level stall
                status = OK
                break
    coef[:] = best_coef
    return best_err, status, it


@njit(cache=True)
def _l1_exchange(B, y, w, start, coef):
    """Exact discrete L1 fit by descent over interpolating vertices.

    A vertex interpolates ``y`` at ``r + 1`` active points. It is optimal
    when the dual multipliers ``u`` of the active points lie in ``[-1, 1]``;
    otherwise the point with the largest ``|u|`` is released and the fit
    moves along that edge to the weighted-median breakpoint, whose point
    becomes active. Returns ``(objective, status, iterations)``.
    """
    m, n = B.shape
    e0 = _residual(B, y, start)
    act = np.argsort(np.abs(e0))[:n].copy()
    is_act = np.zeros(m, dtype=np.bool_)
    A = np.empty((n, n))
    At = np.empty((n, n))
    rhs = np.empty(n)
    g = np.empty(n)
    unit = np.zeros(n)
    status = NOT_CONVERGED
    obj = np.inf
    # residuals at roundoff level count as interpolated
    tiny = 1e-13 * (np.max(np.abs(y)) + 1e-300)
    it = 0
    for it in range(1, MAX_EXCHANGE + 1):
        is_act[:] = False
        for j in range(n):
            is_act[act[j]] = True
            A[j] = B[act[j]]
            rhs[j] = y[act[j]]
        c = np.linalg.solve(A, rhs)
        e = _residual(B, y, c)
        obj = 0.0
        g[:] = 0.0
        for i in range(m):
            if abs(e[i]) <= tiny:
                e[i] = 0.0
            obj += w[i] * abs(e[i])
            if not is_act[i] and e[i] != 0.0:
                s = 1.0 if e[i] > 0 else -1.0
                for a in range(n):
                    g[a] += w[i] * s * B[i, a]
        coef[:] = c
        if obj == 0.0:
            status = OK
            break
        for j in range(n):
            for a in range(n):
                At[a, j] = A[j, a]
        v = np.linalg.solve(At, g)
        jmax = 0
        umax = 0.0
        for j in range(n):
            wj = w[act[j]]
            u = abs(v[j]) / wj if wj > 0 else (np.inf if v[j] != 0 else 0.0)
            if u > umax:
                umax = u
                jmax = j
        if umax <= 1.0 + 1e-10:
            status = OK
            break
        # edge direction: other active residuals stay zero
        unit[:] = 0.0
        unit[jmax] = 1.0 if v[jmax] > 0 else -1.0
        d = np.linalg.solve(A, unit)
        bd = B @ d
        slope = w[act[jmax]] - abs(v[jmax])
        ts = np.empty(m)
        ws = np.empty(m)
        idx = np.empty(m, dtype=np.int64)
        cnt = 0
        for i in range(m):
            if is_act[i] or bd[i] == 0.0:
                continue
            ti = e[i] / bd[i]
            if ti > 0:
                ts[cnt] = ti
                ws[cnt] = 2.0 * w[i] * abs(bd[i])
                idx[cnt] = i
                cnt += 1
        if cnt == 0:
            break
        order = np.argsort(ts[:cnt])
        enter = idx[order[cnt - 1]]
        for o in order:
            slope += ws[o]
            if slope >= 0:
                enter = idx[o]
                break
        act[jmax] = enter
    return obj, status, it


@njit(cache=True)
def _irls(B, y, w, p, coef, max_iter):
    m = y.size
    scale = 0.0
    for i in range(m):
        if abs(y[i]) > scale:
            scale = abs(y[i])
    scale += 1e-300
    c = _weighted_lsq(B, y, w)
    e = _residual(B, y, c)
    obj = 0.0
    for i in range(m):
        obj += w[i] * abs(e[i]) ** p
    ww = np.empty(m)
    best_obj = obj
    best_c = c.copy()
    status = NOT_CONVERGED
    flat = 0
    it = 0
    for it in range(1, max_iter + 1):
        prev_obj = obj
        for i in range(m):
            a = abs(e[i])
            if p == 1.0:
                ww[i] = w[i] / math.sqrt(a * a + (P1_SMOOTHING * scale) ** 2)
            else:
                ww[i] = w[i] * max(a, IRLS_FLOOR * scale) ** (p - 2.0)
        target = _weighted_lsq(B, y, ww)
        if p <= 2.0:
            step = 1.0
            cand = target
        else:
            # damped Newton: the reweighted solve overshoots by a factor p - 1
            step = 1.0 / (p - 1.0)
            cand = c + step * (target - c)
        e_new = _residual(B, y, cand)
        obj_new = 0.0
        for i in range(m):
            obj_new += w[i] * abs(e_new[i]) ** p
        tries = 0
        while obj_new > obj and tries < 30 and p > 2.0:
            step *= 0.5
            cand = c + step * (target - c)
            e_new = _residual(B, y, cand)
            obj_new = 0.0
            for i in range(m):
                obj_new += w[i] * abs(e_new[i]) ** p
            tries += 1
        dc = 0.0
        cn = 0.0
        for a in range(c.size):
            dc = max(dc, abs(cand[a] - c[a]))
            cn = max(cn, abs(cand[a]))
        if obj_new <= obj or p < 2.0:
            c = cand
            e = e_new
            obj = obj_new
        if obj < best_obj:
            best_obj = obj
            best_c[:] = c
        if dc <= IRLS_STEP_TOL * (cn + scale):
            status = OK
            break
        # p = 1 converges only linearly and its minimiser may be non-unique
        # (coefficients drift along a flat direction): stop once the
        # objective is stationary
        flat = flat + 1 if abs(prev_obj - obj) <= OBJ_STALL_TOL * obj else 0
        if flat >= 3:
            status = OK
            break
    coef[:] = best_c
    return best_obj ** (1.0 / p), status, it


@njit(cache=True)
def fit_segment(f, h, i0, i1, r, p, coef):
    """Best degree-``r`` fit over indices ``i0..i1``.

    Returns ``(delta, status, iterations)``.

    ``coef`` (length ``r + 1``) receives Legendre coefficients.
    """
    m = i1 - i0 + 1
    y = f[i0:i1 + 1]
    coef[:] = 0.0
    if m <= r + 1:
        if m == 1:
            coef[0] = y[0]
            return 0.0, OK, 0
        B = legendre_matrix(grid_x(m), m - 1)
        c = np.linalg.solve(B, y.copy())
        coef[:m] = c
        return 0.0, OK, 0
    if r == 0 and math.isinf(p):
        lo = y[0]
        hi = y[0]
        for i in range(1, m):
            if y[i] < lo:
                lo = y[i]
            elif y[i] > hi:
                hi = y[i]
        coef[0] = 0.5 * (lo + hi)
        return 0.5 * (hi - lo), OK, 0
    B = legendre_matrix(grid_x(m), r)
    w = trapezoid_weights(m, h)
    if math.isinf(p):
        return _remez(B, y, r, coef)
    if p == 2.0:
        c = _weighted_lsq(B, y, w)
        coef[:] = c
        return lp_of(_residual(B, y, c), w, p), OK, 1
    if p == 1.0:
        # a few smoothed reweighting steps locate the active points
        warm = np.empty(r + 1)
        _, _, it0 = _irls(B, y, w, p, warm, L1_WARM_STEPS)
        d, status, it1 = _l1_exchange(B, y, w, warm, coef)
        return d, status, it0 + it1
    return _irls(B, y, w, p, coef, MAX_IRLS)


@njit(cache=True)
def segment_delta(f, h, i0, i1, r, p):
    coef = np.empty(r + 1)
    return fit_segment(f, h, i0, i1, r, p, coef)[0]


@njit(cache=True)
def next_stop(f, h, u, lo, hi, end, eps, r, p, coef):
    """First index ``v`` in ``(u, end]`` with ``delta[u, v] > eps``.

    Known bounds: the answer is ``>= lo`` and ``<= hi``; ``end + 1`` means
    no such index. Relies on ``v -> delta[u, v]`` being nondecreasing.
    """
    if r == 0 and math.isinf(p):
        mn = f[u]
        mx = f[u]
        for v in range(u + 1, end + 1):
            x = f[v]
            if x < mn:
                mn = x
            if x > mx:
                mx = x
            if 0.5 * (mx - mn) > eps:
                return v
        return end + 1
    if lo < u + 1:
        lo = u + 1
    if hi > end + 1:
        hi = end + 1
    if lo > end:
        return end + 1
    if lo > hi:
        lo = hi
    false_at = lo - 1
    step = 1
    probe = lo
    while probe < hi:
        if fit_segment(f, h, u, probe, r, p, coef)[0] > eps:
            hi = probe
            break
        false_at = probe
        step *= 2
        probe = lo + step - 1
    while hi - false_at > 1:
        mid = (false_at + hi) // 2
        if fit_segment(f, h, u, mid, r, p, coef)[0] > eps:
            hi = mid
        else:
            false_at = mid
    return hi


@njit(cache=True)
def schedule(f, h, start, end, eps, r, p, max_count, lo_b, hi_b, taus):
    """Stopping times at threshold ``eps``; returns the count found in range.

    ``taus[0] = start``; ``taus[1..count]`` are grid indices ``<= end``.
    ``lo_b`` / ``hi_b`` bound each stopping time (from neighbouring
    thresholds), or are ignored when empty.
    """
    coef = np.empty(r + 1)
    taus[0] = start
    use_bounds = lo_b.size > 0
    for j in range(1, max_count + 1):
        lo = taus[j - 1] + 1
        hi = end + 1
        if use_bounds:
            lo = max(lo, lo_b[j])
            hi = min(hi, hi_b[j])
        v = next_stop(f, h, taus[j - 1], lo, hi, end, eps, r, p, coef)
        if v > end:
            return j - 1
        taus[j] = v
    return max_count


@njit(cache=True)
def zero_threshold(f, start, end):
    scale = 0.0
    for i in range(start, end + 1):
        if abs(f[i]) > scale:
            scale = abs(f[i])
    return 1e-12 * scale


@njit(cache=True)
def gamma_search(f, h, start, end, k, r, p, tol_rel, taus_hi):
    """Bisection for the smallest threshold whose k-th stop reaches ``end``.

    Returns ``(gamma, lo, hi, count)``; ``taus_hi[:count + 1]`` holds the
    schedule at ``hi`` (which satisfies the coverage predicate).
    """
    d01 = segment_delta(f, h, start, end, r, p)
    taus_hi[:] = end + 1
    taus_hi[0] = start
    if d01 <= zero_threshold(f, start, end):
        return 0.0, 0.0, 0.0, 0
    lo = 0.0
    hi = d01
    count_hi = 0
    lo_b = np.zeros(k + 1, dtype=np.int64)
    hi_b = np.full(k + 1, end + 1, dtype=np.int64)
    taus = np.empty(k + 1, dtype=np.int64)
    while hi - lo > tol_rel * hi:
        mid = 0.5 * (lo + hi)
        cnt = schedule(f, h, start, end, mid, r, p, k, lo_b, hi_b, taus)
        if cnt < k or taus[k] >= end:
            hi = mid
            count_hi = cnt
            for j in range(k + 1):
                taus_hi[j] = taus[j] if j <= cnt else end + 1
                hi_b[j] = taus_hi[j]
        else:
            lo = mid
            for j in range(k + 1):
                lo_b[j] = taus[j]
    return 0.5 * (lo + hi), lo, hi, count_hi


@njit(cache=True)
def phi_star_error(f, h, start, end, k, r, p, tol_rel):
    """``(gamma, error, pieces)`` of the k-piece free-knot spline on ``[start, end]``.

    The error aggregates closed-piece errors: sum of ``delta_j^p`` (p finite)
    or their maximum (p infinite).
    """
    taus = np.empty(k + 1, dtype=np.int64)
    gam, lo, hi, cnt = gamma_search(f, h, start, end, k, r, p, tol_rel, taus)
    if gam == 0.0:
        return 0.0, segment_delta(f, h, start, end, r, p), 1
    acc = 0.0
    pieces = 0
    left = start
    for j in range(1, cnt + 2):
        right = taus[j] if (j <= cnt and taus[j] < end) else end
        d = segment_delta(f, h, left, right, r, p)
        pieces += 1
        if math.isinf(p):
            acc = max(acc, d)
        else:
            acc += d ** p
        left = right
        if right >= end:
            break
    err = acc if math.isinf(p) else acc ** (1.0 / p)
    return gam, err, pieces


@njit(cache=True)
def eps_spline_error(f, h, start, end, eps, r, p):
    """``(error, pieces)`` of the threshold-``eps`` variable-knot spline."""
    n = end - start + 1
    taus = np.empty(n + 1, dtype=np.int64)
    empty = np.empty(0, dtype=np.int64)
    cnt = schedule(f, h, start, end, eps, r, p, n, empty, empty, taus)
    acc = 0.0
    pieces = 0
    left = start
    for j in range(1, cnt + 2):
        right = taus[j] if (j <= cnt and taus[j] < end) else end
        d = segment_delta(f, h, left, right, r, p)
        pieces += 1
        if math.isinf(p):
            acc = max(acc, d)
        else:
            acc += d ** p
        left = right
        if right >= end:
            break
    err = acc if math.isinf(p) else acc ** (1.0 / p)
    return err, pieces
