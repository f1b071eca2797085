"""Shared types, grids, interpolation and combinatorics.

Every family of functions in the library (marginal survival, diagonal
sections, order-statistic survivals, rate profiles) is represented by
vectorised callables.  Tabulated data enters through
:class:`TabulatedFunction`, which interpolates with a monotone
piecewise-cubic (PCHIP) scheme.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator

Func = Callable[[np.ndarray], np.ndarray]

PROB_SLACK = 1e-12
MAX_DIMENSION = 12
DEFAULT_GRID_POINTS = 512
DEFAULT_TAIL_LEVEL = 1e-3
FAMILY_TOL = 1e-9


class LifelineError(Exception):
    """Base class for library errors."""


class DomainError(LifelineError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class RangeError(LifelineError, ValueError):
    """A target value lies outside the range of a function."""


class ContractError(LifelineError, ValueError):
    """An input object violates the documented contract."""


class MonotonicityError(ContractError):
    """A tabulation or family violates its declared monotonicity."""

    def __init__(self, message: str, index: int):
        super().__init__(message)
        self.index = index


class InconsistentInputError(LifelineError):
    """Input families are not jointly realizable."""


class ConditionHError(LifelineError):
    """The marginal survival is not continuous, positive and strictly decreasing."""


class SupportError(LifelineError):
    """A quantity is evaluated where all the probability mass has vanished."""


class ConsistencyError(LifelineError):
    """Two algebraically equivalent evaluation routes disagree."""


# ---------------------------------------------------------------------------
# combinatorics
# ---------------------------------------------------------------------------


def falling_factorial(n: int, k: int) -> int:
    """Return ``n (n-1) ... (n-k+1)``, the number of k-permutations of n items."""
    if n < 0 or k < 0:
        raise DomainError(f"falling_factorial needs non-negative arguments, got ({n}, {k})")
    if k > n:
        raise DomainError(f"falling_factorial needs k <= n, got ({n}, {k})")
    return math.perm(n, k)


def check_dimension(r: int) -> int:
    if not isinstance(r, (int, np.integer)) or isinstance(r, bool):
        raise DomainError(f"dimension must be an integer, got {r!r}")
    if not 2 <= r <= MAX_DIMENSION:
        raise DomainError(f"dimension r={r} outside [2, {MAX_DIMENSION}]")
    return int(r)


def orderstat_coefficients(r: int, ell: int) -> list[tuple[int, int]]:
    """Pairs ``(h, c)`` such that G_{ell:r} = sum_h c * P(min over h units > t)."""
    if not 1 <= ell <= r:
        raise DomainError(f"order index {ell} outside [1, {r}]")
    out = []
    for h in range(r - ell + 1, r + 1):
        sign = -1 if (h - r - 1 + ell) % 2 else 1
        out.append((h, sign * math.comb(r, h) * math.comb(h - 1, r - ell)))
    return out


def min_weights(r: int, d: int) -> list[tuple[int, float]]:
    """Pairs ``(k, w)`` with P(T_{1:A} > t) = sum_k w * G_{k:r}(t) for |A| = d."""
    if not 1 <= d <= r:
        raise DomainError(f"subset size {d} outside [1, {r}]")
    scale = d / falling_factorial(r, d)
    return [(k, scale * falling_factorial(r - k, d - 1)) for k in range(1, r - d + 2)]


def clamp_prob(p, slack: float = PROB_SLACK):
    """Clip probabilities into [0, 1]; violations beyond ``slack`` raise."""
    arr = np.asarray(p, dtype=float)
    if np.any(arr < -slack) or np.any(arr > 1 + slack):
        bad = arr[(arr < -slack) | (arr > 1 + slack)]
        raise RangeError(f"probability outside [0,1] beyond slack {slack}: {bad.ravel()[:3]}")
    out = np.clip(arr, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# numerics helpers
# ---------------------------------------------------------------------------


def fd_step(t):
    t = np.asarray(t, dtype=float)
    return np.maximum(1e-5, 1e-5 * np.abs(t))


def derivative(f: Func, t, *, lower: Optional[float] = 0.0):
    """Central finite difference with step ``max(1e-5, 1e-5 t)``.

    Points closer than one step to ``lower`` use the second-order
    one-sided forward formula instead.
    """
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    h = fd_step(t)
    near = np.zeros(t.shape, dtype=bool) if lower is None else (t - h < lower)
    out = np.empty(t.shape)
    far = ~near
    if np.any(far):
        tf, hf = t[far], h[far]
        out[far] = (np.asarray(f(tf + hf)) - np.asarray(f(tf - hf))) / (2 * hf)
    if np.any(near):
        tn, hn = np.maximum(t[near], lower), h[near]
        out[near] = (-3 * np.asarray(f(tn)) + 4 * np.asarray(f(tn + hn))
                     - np.asarray(f(tn + 2 * hn))) / (2 * hn)
    return float(out[0]) if scalar else out


def solve_monotone(func: Func, y, lo, hi, *, increasing: bool, dfunc: Optional[Func] = None,
                   xtol: float = 1e-15, ftol: float = 2e-16, maxiter: int = 400):
    """Vectorised safeguarded Newton/bisection for ``func(x) = y`` on ``[lo, hi]``.

    ``func`` must be monotone in the stated direction and the bracket must
    contain the root.  Without ``dfunc`` this is plain bisection.  Iteration
    stops once the residual is within ``ftol`` relative to ``y`` or the step
    falls below ``xtol``.
    """
    y = np.asarray(y, dtype=float)
    shape = y.shape
    y = y.ravel()
    lo = np.broadcast_to(np.asarray(lo, dtype=float), shape).ravel().copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), shape).ravel().copy()
    x = 0.5 * (lo + hi)
    active = np.ones(y.shape, dtype=bool)
    for _ in range(maxiter):
        if not active.any():
            break
        xa = x[active]
        fa = np.asarray(func(xa), dtype=float) - y[active]
        above = fa > 0 if increasing else fa < 0
        lo_a, hi_a = lo[active], hi[active]
        hi_a = np.where(above, xa, hi_a)
        lo_a = np.where(above, lo_a, xa)
        mid = 0.5 * (lo_a + hi_a)
        if dfunc is not None:
            with np.errstate(divide="ignore", invalid="ignore"):
                step = xa - fa / np.asarray(dfunc(xa), dtype=float)
            ok = np.isfinite(step) & (step > lo_a) & (step < hi_a)
            xn = np.where(ok, step, mid)
        else:
            xn = mid
        converged = np.abs(fa) <= ftol * np.abs(y[active])
        done = converged | (np.abs(xn - xa) <= xtol * (1 + np.abs(xa)))
        done |= hi_a - lo_a <= xtol * (1 + np.abs(xa))
        done |= (mid == lo_a) | (mid == hi_a)
        xn = np.where(converged, xa, xn)
        lo[active], hi[active] = lo_a, hi_a
        x[active] = xn
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    return x.reshape(shape) if shape else float(x[0])


def find_upper_time(f: Func, level: float, start: float = 1.0, limit: float = 1e8) -> float:
    """Smallest power-of-two multiple of ``start`` where the decreasing ``f`` drops below ``level``."""
    t = start
    while float(f(np.asarray(t))) > level:
        t *= 2.0
        if t > limit:
            raise SupportError(f"function stays above {level} up to t={limit:g}")
    return t


# ---------------------------------------------------------------------------
# tabulated functions
# ---------------------------------------------------------------------------

_DOMAINS = ("time", "unit")
_MONOTONICITY = ("increasing", "decreasing", "none")


def first_violation(values: np.ndarray, direction: str, slack: float = 0.0, strict: bool = False) -> Optional[int]:
    """Index of the first grid point breaking monotonicity, or None."""
    d = np.diff(np.asarray(values, dtype=float))
    if direction == "increasing":
        bad = d <= 0 if strict else d < -slack
    elif direction == "decreasing":
        bad = d >= 0 if strict else d > slack
    else:
        return None
    hits = np.flatnonzero(bad)
    return int(hits[0]) + 1 if hits.size else None


@dataclass(frozen=True)
class TabulatedFunction:
    """Monotone piecewise-cubic interpolant of tabulated data.

    If ``slopes`` are given the interpolant is the cubic Hermite spline
    through the knots with those derivatives, otherwise PCHIP.  Outside
    the grid the function is held at ``left`` / ``right`` (defaulting to
    the end values).
    """

    grid: np.ndarray
    values: np.ndarray
    domain_kind: str = "time"
    monotonicity: str = "none"
    slopes: Optional[np.ndarray] = None
    left: Optional[float] = None
    right: Optional[float] = None
    _interp: object = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if self.domain_kind not in _DOMAINS:
            raise ContractError(f"domain_kind must be one of {_DOMAINS}")
        if self.monotonicity not in _MONOTONICITY:
            raise ContractError(f"monotonicity must be one of {_MONOTONICITY}")
        if grid.ndim != 1 or grid.shape != values.shape:
            raise ContractError("grid and values must be 1-d arrays of equal length")
        if grid.size < 3:
            raise ContractError("a tabulation needs at least 3 points")
        bad = first_violation(grid, "increasing", strict=True)
        if bad is not None:
            raise MonotonicityError(f"grid not strictly increasing at index {bad}", bad)
        bad = first_violation(values, self.monotonicity)
        if bad is not None:
            raise MonotonicityError(
                f"values not {self.monotonicity} at grid index {bad} (x={grid[bad]:.6g})", bad)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        if self.slopes is not None:
            slopes = np.asarray(self.slopes, dtype=float)
            interp = CubicHermiteSpline(grid, values, slopes, extrapolate=False)
            object.__setattr__(self, "slopes", slopes)
        else:
            interp = PchipInterpolator(grid, values, extrapolate=False)
        object.__setattr__(self, "_interp", interp)

    @property
    def lower(self) -> float:
        return float(self.grid[0])

    @property
    def upper(self) -> float:
        return float(self.grid[-1])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.asarray(self._interp(np.clip(x, self.grid[0], self.grid[-1])), dtype=float)
        left = self.values[0] if self.left is None else self.left
        right = self.values[-1] if self.right is None else self.right
        out = np.where(x < self.grid[0], left, np.where(x > self.grid[-1], right, out))
        return float(out) if out.ndim == 0 else out

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        d = self._interp.derivative()
        out = np.where((x < self.grid[0]) | (x > self.grid[-1]), 0.0,
                       d(np.clip(x, self.grid[0], self.grid[-1])))
        return float(out) if out.ndim == 0 else out

    def to_json(self) -> dict:
        return {"grid": self.grid.tolist(), "values": self.values.tolist()}


def invert_monotone(f: TabulatedFunction, y, tol: float = 1e-10):
    """Solve ``f(x) = y`` for a strictly monotone tabulation.

    The root is bracketed between knots and refined on the interpolant by
    safeguarded Newton steps.
    """
    v = f.values
    d = np.diff(v)
    if np.all(d > 0):
        increasing = True
    elif np.all(d < 0):
        increasing = False
    else:
        bad = first_violation(v, "increasing" if v[-1] >= v[0] else "decreasing", strict=True)
        raise ContractError(f"tabulation is not strictly monotone (index {bad})")
    y_arr = np.asarray(y, dtype=float)
    vmin, vmax = min(v[0], v[-1]), max(v[0], v[-1])
    if np.any(y_arr < vmin - tol) or np.any(y_arr > vmax + tol):
        raise RangeError(f"value(s) outside tabulated range [{vmin:.6g}, {vmax:.6g}]")
    y_c = np.clip(y_arr, vmin, vmax)
    key = v if increasing else v[::-1]
    pos = np.clip(np.searchsorted(key, y_c), 1, v.size - 1)
    if increasing:
        lo, hi = f.grid[pos - 1], f.grid[pos]
    else:
        lo, hi = f.grid[v.size - 1 - pos], f.grid[v.size - pos]
    x = solve_monotone(f._interp, y_c, lo, hi, increasing=increasing, dfunc=f._interp.derivative())
    x = np.asarray(x, dtype=float)
    x = np.where(y_c == v[0], f.grid[0], np.where(y_c == v[-1], f.grid[-1], x))
    return float(x) if x.ndim == 0 else x


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------


def time_grid(t_max: float, n: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    return np.linspace(0.0, float(t_max), int(n))


def unit_grid(n: int = 257) -> np.ndarray:
    return np.linspace(0.0, 1.0, int(n))


def tail_time(survival: Func, level: float = DEFAULT_TAIL_LEVEL) -> float:
    """Time where the decreasing ``survival`` crosses ``level`` (bisection)."""
    hi = find_upper_time(survival, level)
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if float(survival(np.asarray(mid))) > level:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * hi:
            break
    return hi


# ---------------------------------------------------------------------------
# families
# ---------------------------------------------------------------------------


def _as_array(f: Func, x) -> np.ndarray:
    return np.asarray(f(np.asarray(x, dtype=float)), dtype=float)


@dataclass(frozen=True)
class MarginalSurvival:
    """Common one-dimensional survival function with optional density and inverse."""

    gbar: Func
    g: Optional[Func] = None
    gbar_inv: Optional[Func] = None

    def __call__(self, t):
        return _as_array(self.gbar, t)

    def density(self, t):
        if self.g is not None:
            return _as_array(self.g, t)
        return -derivative(self.gbar, t)

    def hazard(self, t):
        return self.density(t) / self(t)

    def inverse(self, u):
        """Return ``t`` with ``gbar(t) = u`` for ``u`` in (0, 1]; ``u = 0`` maps to inf."""
        u = np.asarray(u, dtype=float)
        if np.any(u < 0) or np.any(u > 1):
            raise RangeError("marginal inverse needs u in [0, 1]")
        if self.gbar_inv is not None:
            return _as_array(self.gbar_inv, u)
        pos = u > 0
        out = np.full(u.shape, np.inf)
        if np.any(pos):
            target = u[pos] if u.ndim else u
            umin = float(np.min(target))
            hi = find_upper_time(self.gbar, umin * 0.5, limit=1e12)
            dfunc = (lambda x: -_as_array(self.g, x)) if self.g is not None else None
            x = solve_monotone(self.gbar, target, 0.0, hi, increasing=False, dfunc=dfunc)
            x = np.where(np.asarray(target) >= 1.0, 0.0, x)
            if u.ndim:
                out[pos] = x
            else:
                out = np.asarray(x)
        return float(out) if out.ndim == 0 else out

    def validate(self, grid) -> None:
        """Check condition (H) on ``grid``: gbar(0) = 1, positive, strictly decreasing."""
        grid = np.asarray(grid, dtype=float)
        v = self(grid)
        if grid[0] == 0 and abs(v[0] - 1) > 1e-9:
            raise ConditionHError(f"marginal survival at 0 is {v[0]!r}, not 1")
        if np.any(v <= 0):
            idx = int(np.flatnonzero(v <= 0)[0])
            raise ConditionHError(f"marginal survival not positive at grid index {idx}")
        bad = first_violation(v, "decreasing", strict=True)
        if bad is not None:
            raise ConditionHError(f"marginal survival not strictly decreasing at grid index {bad}")
        if self.g is not None:
            g = self.density(grid)
            if np.any(g < -FAMILY_TOL):
                idx = int(np.flatnonzero(g < -FAMILY_TOL)[0])
                raise ContractError(f"negative density at grid index {idx}")
            fd = -derivative(self.gbar, grid)
            err = np.abs(fd - g)
            if np.any(err > 1e-5 * (1 + np.abs(g))):
                idx = int(np.argmax(err))
                raise ContractError(f"density inconsistent with -dG/dt at grid index {idx}")


def _identity(u):
    return np.asarray(u, dtype=float)


@dataclass(frozen=True)
class DiagonalFamily:
    """Diagonal sections delta_1, ..., delta_r of a diagonal-dependent survival copula.

    ``delta`` may be passed with r entries (delta_1 first) or r-1 entries
    (delta_2 first); delta_1 is always the identity.  ``ddelta`` holds
    optional derivatives in the same layout.
    """

    r: int
    delta: Sequence[Func]
    ddelta: Optional[Sequence[Func]] = None
    u_grid: Optional[np.ndarray] = None
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        r = check_dimension(self.r)
        delta = list(self.delta)
        if len(delta) == r - 1:
            delta = [_identity] + delta
        if len(delta) != r:
            raise ContractError(f"need {r} or {r - 1} diagonal functions, got {len(delta)}")
        object.__setattr__(self, "delta", tuple(delta))
        if self.ddelta is not None:
            dd = list(self.ddelta)
            if len(dd) == r - 1:
                dd = [np.ones_like] + dd
            if len(dd) != r:
                raise ContractError("ddelta must match delta in length")
            object.__setattr__(self, "ddelta", tuple(dd))
        u = unit_grid() if self.u_grid is None else np.asarray(self.u_grid, dtype=float)
        object.__setattr__(self, "u_grid", u)
        self._validate(u)

    def _validate(self, u):
        vals = np.array([_as_array(f, u) for f in self.delta])
        if np.any(np.abs(vals[0] - u) > FAMILY_TOL):
            raise ContractError("delta_1 must be the identity")
        for ell in range(self.r):
            bad = first_violation(vals[ell], "increasing", slack=FAMILY_TOL)
            if bad is not None:
                raise MonotonicityError(f"delta_{ell + 1} not increasing at grid index {bad}", bad)
            if u[0] == 0 and abs(vals[ell, 0]) > FAMILY_TOL:
                raise ContractError(f"delta_{ell + 1}(0) = {vals[ell, 0]!r}, expected 0")
            if u[-1] == 1 and abs(vals[ell, -1] - 1) > FAMILY_TOL:
                raise ContractError(f"delta_{ell + 1}(1) = {vals[ell, -1]!r}, expected 1")
        for ell in range(1, self.r):
            over = vals[ell] - vals[ell - 1] > FAMILY_TOL
            if np.any(over):
                idx = int(np.flatnonzero(over)[0])
                raise MonotonicityError(
                    f"delta_{ell + 1} exceeds delta_{ell} at grid index {idx} (u={u[idx]:.6g})", idx)

    def __call__(self, ell: int, u):
        if not 1 <= ell <= self.r:
            raise DomainError(f"diagonal index {ell} outside [1, {self.r}]")
        return _as_array(self.delta[ell - 1], u)

    def derivative(self, ell: int, u):
        if self.ddelta is not None:
            return _as_array(self.ddelta[ell - 1], u)
        f = self.delta[ell - 1]
        return derivative(f, u, lower=0.0)


@dataclass(frozen=True)
class OrderStatFamily:
    """Survival functions G_{1:r}, ..., G_{r:r} of the order statistics."""

    r: int
    gbar_k: Sequence[Func]
    densities: Optional[Sequence[Func]] = None
    grid: Optional[np.ndarray] = None
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        r = check_dimension(self.r)
        if len(self.gbar_k) != r:
            raise ContractError(f"need {r} order-statistic survival functions, got {len(self.gbar_k)}")
        object.__setattr__(self, "gbar_k", tuple(self.gbar_k))
        if self.densities is not None:
            if len(self.densities) != r:
                raise ContractError("densities must match gbar_k in length")
            object.__setattr__(self, "densities", tuple(self.densities))
        grid = self.grid
        if grid is None:
            grid = time_grid(tail_time(self.gbar_k[-1]))
        object.__setattr__(self, "grid", np.asarray(grid, dtype=float))
        self._validate(self.grid)

    def _validate(self, grid):
        m = self.matrix(grid)
        for k in range(self.r):
            bad = first_violation(m[k], "decreasing", slack=FAMILY_TOL)
            if bad is not None:
                raise MonotonicityError(f"G_{k + 1}:{self.r} not decreasing at grid index {bad}", bad)
            if grid[0] == 0 and abs(m[k, 0] - 1) > FAMILY_TOL:
                raise ContractError(f"G_{k + 1}:{self.r}(0) = {m[k, 0]!r}, expected 1")
        for k in range(1, self.r):
            over = m[k - 1] - m[k] > FAMILY_TOL
            if np.any(over):
                idx = int(np.flatnonzero(over)[0])
                raise MonotonicityError(
                    f"G_{k}:{self.r} exceeds G_{k + 1}:{self.r} at grid index {idx} (t={grid[idx]:.6g})", idx)
        avg = m.mean(axis=0)
        bad = first_violation(avg, "decreasing", slack=FAMILY_TOL)
        if bad is not None:
            raise MonotonicityError(f"average of order-statistic survivals increases at index {bad}", bad)

    def survival(self, k: int, t):
        if k == 0:
            return np.zeros_like(np.asarray(t, dtype=float))
        if k == self.r + 1:
            return np.ones_like(np.asarray(t, dtype=float))
        if not 1 <= k <= self.r:
            raise DomainError(f"order index {k} outside [1, {self.r}]")
        return _as_array(self.gbar_k[k - 1], t)

    def density(self, k: int, t):
        if k in (0, self.r + 1):
            return np.zeros_like(np.asarray(t, dtype=float))
        if not 1 <= k <= self.r:
            raise DomainError(f"order index {k} outside [1, {self.r}]")
        if self.densities is not None:
            return _as_array(self.densities[k - 1], t)
        return -derivative(self.gbar_k[k - 1], t)

    def matrix(self, t) -> np.ndarray:
        return np.array([_as_array(f, t) for f in self.gbar_k])

    def density_matrix(self, t) -> np.ndarray:
        return np.array([self.density(k, t) for k in range(1, self.r + 1)])


@dataclass(frozen=True)
class RateProfile:
    """Failure rates Lambda^[1], ..., Lambda^[r] of minima over sets of each size.

    ``cumulative`` optionally carries closed-form integrals of the rates.
    """

    r: int
    lam: Sequence[Func]
    cumulative: Optional[Sequence[Func]] = None
    grid: Optional[np.ndarray] = None
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        r = check_dimension(self.r)
        if len(self.lam) != r:
            raise ContractError(f"need {r} rate functions, got {len(self.lam)}")
        object.__setattr__(self, "lam", tuple(self.lam))
        if self.cumulative is not None:
            object.__setattr__(self, "cumulative", tuple(self.cumulative))
        if self.grid is not None:
            grid = np.asarray(self.grid, dtype=float)
            object.__setattr__(self, "grid", grid)
            self._validate(grid)

    def _validate(self, grid):
        vals = np.array([_as_array(f, grid) for f in self.lam])
        neg = vals < -FAMILY_TOL
        if np.any(neg):
            d, idx = np.argwhere(neg)[0]
            raise MonotonicityError(f"Lambda^[{d + 1}] negative at grid index {idx}", int(idx))
        if self.cumulative is not None:
            cum = np.array([_as_array(f, grid) for f in self.cumulative])
        else:
            dt = np.diff(grid)
            cum = np.concatenate([np.zeros((self.r, 1)),
                                  np.cumsum(0.5 * (vals[:, 1:] + vals[:, :-1]) * dt, axis=1)], axis=1)
        for d in range(1, self.r):
            over = cum[d - 1] - cum[d] > 1e-6 * (1 + np.abs(cum[d]))
            if np.any(over):
                idx = int(np.flatnonzero(over)[0])
                raise MonotonicityError(
                    f"integrated Lambda^[{d + 1}] below Lambda^[{d}] at grid index {idx}", idx)

    def __call__(self, d: int, t):
        if not 1 <= d <= self.r:
            raise DomainError(f"profile index {d} outside [1, {self.r}]")
        return _as_array(self.lam[d - 1], t)


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


@dataclass
class CheckReport:
    """Outcome of a property check, with a witness on failure."""

    name: str
    passed: bool
    max_violation: float = 0.0
    witness: Optional[dict] = None
    details: dict = field(default_factory=dict)

    def __bool__(self):
        return bool(self.passed)

    def to_json(self) -> dict:
        return _jsonable({"check": self.name, "passed": self.passed,
                          "max_violation": self.max_violation,
                          "witness": self.witness, "details": self.details})


def exponential_marginal(rate: float = 1.0) -> MarginalSurvival:
    """Exponential marginal with analytic density and inverse."""
    rate = float(rate)
    if not rate > 0:
        raise DomainError("exponential rate must be positive")

    def gbar(t):
        return np.exp(-rate * np.asarray(t, dtype=float))

    def g(t):
        return rate * np.exp(-rate * np.asarray(t, dtype=float))

    def inv(u):
        with np.errstate(divide="ignore"):
            return -np.log(np.asarray(u, dtype=float)) / rate

    return MarginalSurvival(gbar, g, inv)
