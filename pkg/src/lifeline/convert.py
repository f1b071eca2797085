"""Conversions among the three equivalent descriptions of a minimally stable law.

(a) marginal survival plus diagonal sections, (b) order-statistic
survivals, (c) failure rates of minima over sets of each size.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .core import (ConditionHError, ConsistencyError, DiagonalFamily, DomainError, InconsistentInputError,
                   MarginalSurvival, MonotonicityError, OrderStatFamily, RateProfile, SupportError,
                   derivative, falling_factorial, find_upper_time, min_weights, orderstat_coefficients,
                   solve_monotone, unit_grid)

FORM_TOL = 1e-10
PROFILE_FORM_TOL = 1e-8
CUM_KNOTS = 512
CUM_TOL = 1e-10

# Gauss-Kronrod 7/15 rule on [-1, 1]: Kronrod nodes, Kronrod weights, and the
# Gauss weights attached to the odd-indexed (Gauss) nodes
_XK = np.array([-0.991455371120812639206854697526329, -0.949107912342758524526189684047851,
                -0.864864423359769072789712788640926, -0.741531185599394439863864773280788,
                -0.586087235467691130294144845693013, -0.405845151377397166906606412076961,
                -0.207784955007898467600689403773245, 0.0,
                0.207784955007898467600689403773245, 0.405845151377397166906606412076961,
                0.586087235467691130294144845693013, 0.741531185599394439863864773280788,
                0.864864423359769072789712788640926, 0.949107912342758524526189684047851,
                0.991455371120812639206854697526329])
_WK = np.array([0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
                0.204432940075298892414161999234649, 0.190350578064785409913256402421014,
                0.169004726639267902826583426598550, 0.140653259715525918745189590510238,
                0.104790010322250183839876322541518, 0.063092092629978553290700663189204,
                0.022935322010529224963732008058970])
_WG = np.zeros(15)
_WG[1::2] = [0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
             0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
             0.381830050505118944950369775488975, 0.279705391489276667901467771423780,
             0.129484966168869693270611432679082]


def _scalar(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


# ---------------------------------------------------------------------------
# (a) -> (b)
# ---------------------------------------------------------------------------


def orderstat_from_diagonals(diag: DiagonalFamily, marg: MarginalSurvival, grid=None) -> OrderStatFamily:
    r = diag.r
    coefs = [orderstat_coefficients(r, ell) for ell in range(1, r + 1)]

    def surv(ell):
        def f(t):
            u = marg(t)
            return sum(c * diag(h, u) for h, c in coefs[ell - 1])
        return f

    densities = None
    if diag.ddelta is not None:
        def dens(ell):
            def f(t):
                u, g = marg(t), marg.density(t)
                return sum(c * diag.derivative(h, u) * g for h, c in coefs[ell - 1])
            return f
        densities = [dens(ell) for ell in range(1, r + 1)]
    try:
        return OrderStatFamily(r, [surv(ell) for ell in range(1, r + 1)], densities=densities, grid=grid,
                               metadata={"source": "diagonals"})
    except MonotonicityError as exc:
        raise InconsistentInputError(f"diagonals are not jointly realizable: {exc}") from exc


def min_survival_from_diagonals(diag: DiagonalFamily, marg: MarginalSurvival, d: int, t):
    """P(T_{1:A} > t) = delta_d(G(t)) for any |A| = d."""
    return _scalar(diag(d, marg(t)))


# ---------------------------------------------------------------------------
# (b) -> marginal, minima, survivor counts
# ---------------------------------------------------------------------------


def marginal_from_orderstats(os: OrderStatFamily) -> MarginalSurvival:
    r = os.r

    def gbar(t):
        return sum(os.survival(k, t) for k in range(1, r + 1)) / r

    def g(t):
        return sum(os.density(k, t) for k in range(1, r + 1)) / r

    marg = MarginalSurvival(gbar, g)
    grid = os.grid
    try:
        marg.validate(grid)
    except (ConditionHError, ValueError) as exc:
        raise InconsistentInputError(f"average of order-statistic survivals is not a valid marginal: {exc}") from exc
    return marg


def min_survival_forms(os: OrderStatFamily, d: int, t):
    """Both summation forms of P(T_{1:A} > t), |A| = d."""
    r = os.r
    if not 1 <= d <= r:
        raise DomainError(f"subset size {d} outside [1, {r}]")
    t = np.asarray(t, dtype=float)
    by_k = sum(w * os.survival(k, t) for k, w in min_weights(r, d))
    rd = falling_factorial(r, d)
    by_h = sum(falling_factorial(h, d) / rd * (os.survival(r - h + 1, t) - os.survival(r - h, t))
               for h in range(d, r + 1))
    return _scalar(by_k), _scalar(by_h)


def min_survival_from_orderstats(os: OrderStatFamily, d: int, t):
    a, b = min_survival_forms(os, d, t)
    if np.max(np.abs(np.asarray(a) - np.asarray(b))) > FORM_TOL:
        raise ConsistencyError(f"summation forms of the minimum survival disagree: {a} vs {b}")
    return a


def survivor_count_pmf(os: OrderStatFamily, h: int, t):
    """P(N(t) = r - h), i.e. exactly h units alive at t."""
    r = os.r
    if not 0 <= h <= r:
        raise DomainError(f"survivor count {h} outside [0, {r}]")
    return _scalar(os.survival(r - h + 1, t) - os.survival(r - h, t))


def survivor_set_from_orderstats(os: OrderStatFamily, h: int, t):
    """P(exactly a given set of h units alive at t)."""
    return _scalar(np.asarray(survivor_count_pmf(os, h, t)) / math.comb(os.r, h))


# ---------------------------------------------------------------------------
# (b) -> (a)
# ---------------------------------------------------------------------------


def _inverse_marginal(marg: MarginalSurvival):
    # one-entry memo: callers evaluate several diagonals at the same u array
    memo = {}

    def inv(u):
        u = np.asarray(u, dtype=float)
        key = (u.shape, u.tobytes())
        hit = memo.get("last")
        if hit is not None and hit[0] == key:
            return hit[1]
        out = _solve(u)
        memo["last"] = (key, out)
        return out

    def _solve(u):
        if np.any(u < 0) or np.any(u > 1):
            raise DomainError("u must lie in [0, 1]")
        out = np.full(u.shape, np.inf)
        out[u >= 1] = 0.0
        mid = (u > 0) & (u < 1)
        if np.any(mid):
            target = u[mid]
            hi = find_upper_time(marg, float(target.min()) * 0.5, limit=1e12)
            # coarse table for tight brackets, then safeguarded Newton
            knots = np.linspace(0.0, hi, 257)
            vals = marg(knots)
            pos = np.clip(np.searchsorted(-vals, -target), 1, knots.size - 1)
            out[mid] = solve_monotone(marg, target, knots[pos - 1], knots[pos], increasing=False,
                                      dfunc=lambda x: -marg.density(x), xtol=1e-14, ftol=1e-14)
        return out
    return inv


def diagonals_from_orderstats(os: OrderStatFamily, u_grid=None):
    marg = marginal_from_orderstats(os)
    try:
        marg.validate(os.grid)
    except ConditionHError:
        raise
    r = os.r
    inv = _inverse_marginal(marg)
    weights = [min_weights(r, d) for d in range(1, r + 1)]

    def delta(d):
        def f(u):
            u = np.asarray(u, dtype=float)
            t = inv(u)
            out = np.zeros(u.shape)
            pos = u > 0
            if np.any(pos):
                out[pos] = sum(w * os.survival(k, t[pos]) for k, w in weights[d - 1])
            out = np.clip(out, 0.0, 1.0)
            return _scalar(out)
        return f

    def ddelta(d):
        def f(u):
            u = np.asarray(u, dtype=float)
            t = inv(u)
            out = np.zeros(u.shape)
            pos = u > 0
            if np.any(pos):
                tp = t[pos]
                num = sum(w * os.density(k, tp) for k, w in weights[d - 1])
                out[pos] = num / marg.density(tp)
            return _scalar(out)
        return f

    diag = DiagonalFamily(r, [delta(d) for d in range(2, r + 1)], [ddelta(d) for d in range(2, r + 1)],
                          u_grid=unit_grid() if u_grid is None else u_grid, metadata={"source": "orderstats"})
    return diag, marg


# ---------------------------------------------------------------------------
# (a) -> (c)
# ---------------------------------------------------------------------------


def profile_from_diagonals(diag: DiagonalFamily, marg: MarginalSurvival, grid=None) -> RateProfile:
    r = diag.r
    analytic = diag.ddelta is not None

    def lam(ell):
        def f(t):
            t = np.asarray(t, dtype=float)
            u = marg(t)
            val = diag(ell, u)
            if np.any(val <= 0):
                raise SupportError(f"delta_{ell}(G(t)) vanishes; rate undefined")
            if analytic:
                return _scalar(diag.derivative(ell, u) * marg.density(t) / val)
            return _scalar(-derivative(lambda s: np.log(diag(ell, marg(s))), t))
        return f

    return RateProfile(r, [lam(ell) for ell in range(1, r + 1)], grid=grid,
                       metadata={"source": "diagonals", "analytic": analytic})


# ---------------------------------------------------------------------------
# (c) -> (a), (b)
# ---------------------------------------------------------------------------


def _gk_integral(f, a, b):
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    pts = mid[:, None] + half[:, None] * _XK[None, :]
    vals = np.asarray(f(pts.ravel()), dtype=float).reshape(pts.shape)
    return half * (vals @ _WK), half * (vals @ _WG)


def _interval_integrals(f, a, b, tol=CUM_TOL, depth=0):
    """Integrals of f over [a_i, b_i], bisected until the Kronrod and Gauss estimates agree."""
    kron, gauss = _gk_integral(f, a, b)
    bad = np.abs(kron - gauss) > tol * np.maximum(1.0, np.abs(kron))
    if np.any(bad) and depth < 30:
        m = 0.5 * (a[bad] + b[bad])
        kron[bad] = (_interval_integrals(f, a[bad], m, tol, depth + 1)
                     + _interval_integrals(f, m, b[bad], tol, depth + 1))
    return kron


class CumulativeHazard:
    """t -> integral of a rate over [0, t].

    Anchor values at equispaced knots come from per-interval Gauss-Kronrod
    integrals refined to 1e-10; a query adds the integral from the nearest
    knot below, computed the same way, so there is no interpolation error.
    """

    def __init__(self, rate, t_max: float, knots: int = CUM_KNOTS):
        self.rate = rate
        grid = np.linspace(0.0, t_max, knots)
        inc = _interval_integrals(rate, grid[:-1], grid[1:])
        self.grid = grid
        self.values = np.concatenate([[0.0], np.cumsum(inc)])
        self.t_max = float(t_max)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise DomainError("cumulative hazard needs t >= 0")
        out = np.full(t.shape, np.inf)
        fin = np.isfinite(t)
        tf = t[fin]
        idx = np.clip(np.searchsorted(self.grid, tf, side="right") - 1, 0, self.grid.size - 1)
        base = self.grid[idx]
        extra = np.zeros(tf.shape)
        move = tf > base
        if np.any(move):
            extra[move] = _interval_integrals(self.rate, base[move], tf[move])
        out[fin] = self.values[idx] + extra
        return _scalar(out)


def _cumulatives(profile: RateProfile):
    if profile.cumulative is not None:
        return list(profile.cumulative), {}
    t_max = profile.grid[-1] if profile.grid is not None else None
    meta = {}
    if t_max is None:
        # run until the marginal survival is negligible
        t_max = 1.0
        lam1 = profile.lam[0]
        for _ in range(40):
            h = _interval_integrals(lam1, np.array([0.0]), np.array([t_max]))[0]
            if h > 25.0:
                break
            t_max *= 2.0
        else:
            meta["truncation_warning"] = f"cumulative rate still {h:.3g} at t={t_max:g}"
    return [CumulativeHazard(f, t_max) for f in profile.lam], meta


def diagonals_from_profile(profile: RateProfile, u_grid=None):
    r = profile.r
    cums, meta = _cumulatives(profile)
    H1 = cums[0]

    def gbar(t):
        return _scalar(np.exp(-np.asarray(H1(t))))

    def g(t):
        return _scalar(profile(1, t) * np.exp(-np.asarray(H1(t))))

    marg = MarginalSurvival(gbar, g)
    inv = _inverse_marginal(marg)

    def delta(d):
        def f(u):
            u = np.asarray(u, dtype=float)
            t = inv(u)
            out = np.zeros(u.shape)
            pos = u > 0
            out[pos] = np.exp(-np.asarray(cums[d - 1](t[pos])))
            return _scalar(np.clip(out, 0.0, 1.0))
        return f

    def ddelta(d):
        def f(u):
            u = np.asarray(u, dtype=float)
            t = inv(u)
            out = np.zeros(u.shape)
            pos = u > 0
            tp = t[pos]
            out[pos] = (profile(d, tp) * np.exp(-np.asarray(cums[d - 1](tp)))) / np.asarray(g(tp))
            return _scalar(out)
        return f

    meta = dict(meta, source="profile")
    diag = DiagonalFamily(r, [delta(d) for d in range(2, r + 1)], [ddelta(d) for d in range(2, r + 1)],
                          u_grid=unit_grid() if u_grid is None else u_grid, metadata=meta)
    return diag, marg


def orderstats_from_profile(profile: RateProfile, grid=None) -> OrderStatFamily:
    r = profile.r
    cums, meta = _cumulatives(profile)
    coefs = [orderstat_coefficients(r, ell) for ell in range(1, r + 1)]

    def surv(ell):
        def f(t):
            return _scalar(sum(c * np.exp(-np.asarray(cums[h - 1](t))) for h, c in coefs[ell - 1]))
        return f

    def dens(ell):
        def f(t):
            return _scalar(sum(c * profile(h, t) * np.exp(-np.asarray(cums[h - 1](t)))
                               for h, c in coefs[ell - 1]))
        return f

    try:
        return OrderStatFamily(r, [surv(ell) for ell in range(1, r + 1)],
                               densities=[dens(ell) for ell in range(1, r + 1)], grid=grid,
                               metadata=dict(meta, source="profile"))
    except MonotonicityError as exc:
        raise InconsistentInputError(f"profile is not realizable: {exc}") from exc


# ---------------------------------------------------------------------------
# (b) -> (c)
# ---------------------------------------------------------------------------


def profile_forms(os: OrderStatFamily, ell: int, t):
    """Rate of the minimum over ell units from both summation forms."""
    r = os.r
    t = np.asarray(t, dtype=float)
    S = {k: os.survival(k, t) for k in range(0, r + 2)}
    D = {k: os.density(k, t) for k in range(0, r + 2)}
    num_k = sum(falling_factorial(r - k, ell - 1) * D[k] for k in range(1, r - ell + 2))
    den_k = sum(falling_factorial(r - k, ell - 1) * S[k] for k in range(1, r - ell + 2))
    num_h = sum(falling_factorial(h, ell) * (D[r - h + 1] - D[r - h]) for h in range(ell, r + 1))
    den_h = sum(falling_factorial(h, ell) * (S[r - h + 1] - S[r - h]) for h in range(ell, r + 1))
    if np.any(np.asarray(den_k) <= 0) or np.any(np.asarray(den_h) <= 0):
        raise SupportError(f"minimum over {ell} units has no surviving mass at some t")
    return _scalar(num_k / den_k), _scalar(num_h / den_h)


def profile_from_orderstats(os: OrderStatFamily, grid=None, tol: float = PROFILE_FORM_TOL) -> RateProfile:
    r = os.r

    def lam(ell):
        def f(t):
            a, b = profile_forms(os, ell, t)
            a_arr, b_arr = np.asarray(a), np.asarray(b)
            if np.any(np.abs(a_arr - b_arr) > tol * np.maximum(1.0, np.abs(a_arr))):
                raise ConsistencyError(f"summation forms of Lambda^[{ell}] disagree")
            return a
        return f

    return RateProfile(r, [lam(ell) for ell in range(1, r + 1)], grid=grid,
                       metadata={"source": "orderstats"})


def exchangeable_mu(profile: RateProfile, d: int, t):
    """Per-unit rate of the d survivors given no failures, Lambda^[d] / d (exchangeable case)."""
    return _scalar(np.asarray(profile(d, t)) / d)
