"""Archimedean copulas: diagonals from generators, rates of minima, Schur-constant
models and recovery of a generator from its top diagonal."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import PchipInterpolator

from .core import (ConsistencyError, ContractError, DiagonalFamily, DomainError, LifelineError,
                   MarginalSurvival, SupportError, check_dimension, derivative, solve_monotone,
                   unit_grid)

STRICT_PROBE = 1e-8
STRICT_THRESHOLD = 10.0
INVERSE_TOL = 1e-9
MU_AGREEMENT = 1e-6
SLOPE_RTOL = 0.05
RECOVERY_TOL = 1e-4
RECOVERY_WINDOW = (0.05, 0.95)


class SingularityError(LifelineError):
    """A generator derivative vanishes or blows up where a rate is requested."""


class NonStrictWarning(UserWarning):
    pass


class ConvergenceWarning(UserWarning):
    pass


class NonConvexWarning(UserWarning):
    pass


def _arr(x):
    return np.asarray(x, dtype=float)


@dataclass(frozen=True)
class GeneratorSpec:
    """Archimedean generator psi on (0, 1] with its inverse.

    ``psi_prime`` is optional; a central difference is used when absent.
    """

    psi: Callable
    psi_inv: Callable
    psi_prime: Optional[Callable] = None
    strict: bool = True
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    def __call__(self, u):
        return _arr(self.psi(_arr(u)))

    def inverse(self, x):
        return _arr(self.psi_inv(_arr(x)))

    def derivative(self, u):
        if self.psi_prime is not None:
            return _arr(self.psi_prime(_arr(u)))
        return derivative(self.psi, u, lower=0.0)

    @property
    def psi_at_zero(self) -> float:
        return np.inf if self.strict else float(self.psi(0.0))

    def validate(self, n: int = 64) -> None:
        u = np.linspace(0.0, 1.0, n + 1)[1:]
        v = self(u)
        if abs(float(self(1.0))) > INVERSE_TOL:
            raise ContractError(f"generator {self.name}: psi(1) = {float(self(1.0))!r}, expected 0")
        if np.any(np.diff(v) > INVERSE_TOL * (1 + np.abs(v[:-1]))):
            raise ContractError(f"generator {self.name} is not decreasing")
        second = v[:-2] - 2 * v[1:-1] + v[2:]
        bad = second < -1e-9 * (1 + np.abs(v[1:-1]))
        self.params["convex"] = not bool(np.any(bad))
        if np.any(bad):
            idx = int(np.flatnonzero(bad)[0])
            warnings.warn(f"generator {self.name} is not convex near u={u[idx + 1]:.4g}; "
                          "it need not define a copula", NonConvexWarning)
        back = self.inverse(v)
        if np.any(np.abs(back - u) > INVERSE_TOL):
            raise ContractError(f"generator {self.name}: psi_inv(psi(u)) != u")
        if self.strict and not float(self(STRICT_PROBE)) > STRICT_THRESHOLD:
            raise ContractError(f"generator {self.name} declared strict but psi(1e-8) is small")

    def scaled(self, c: float) -> "GeneratorSpec":
        """The generator ``c psi``, which yields the same copula."""
        c = float(c)
        if not c > 0:
            raise DomainError("generator scale must be positive")
        prime = None if self.psi_prime is None else (lambda u: c * _arr(self.psi_prime(u)))
        return GeneratorSpec(lambda u: c * _arr(self.psi(u)), lambda x: _arr(self.psi_inv(_arr(x) / c)),
                             prime, self.strict, f"{self.name}*{c:g}", dict(self.params))


def log_generator() -> GeneratorSpec:
    """Independence: psi(u) = -log u."""
    with np.errstate(divide="ignore"):
        return GeneratorSpec(lambda u: -np.log(_arr(u)), lambda x: np.exp(-_arr(x)),
                             lambda u: -1.0 / _arr(u), True, "log", {})


def power_ratio_generator(alpha: float, beta: float) -> GeneratorSpec:
    """Generator with inverse psi^{-1}(t) = (t^beta + 1)^(-alpha).

    Hence psi(u) = (u^(-1/alpha) - 1)^(1/beta).  With an exponential
    marginal the minimum of ell lifetimes has survival
    (ell^beta e^(t/alpha) - ell^beta + 1)^(-alpha).
    """
    a, b = float(alpha), float(beta)
    if not a > 0 or not b >= 1:
        raise DomainError("power-ratio generator needs alpha > 0 and beta >= 1")

    def psi(u):
        u = _arr(u)
        with np.errstate(divide="ignore"):
            return np.maximum(np.expm1(-np.log(u) / a), 0.0) ** (1 / b)

    def psi_inv(x):
        return np.exp(-a * np.log1p(_arr(x) ** b))

    def psi_prime(u):
        u = _arr(u)
        with np.errstate(divide="ignore", invalid="ignore"):
            base = np.expm1(-np.log(u) / a)
            return -(1 / (a * b)) * u ** (-1 / a - 1) * base ** (1 / b - 1)

    return GeneratorSpec(psi, psi_inv, psi_prime, True, "power_ratio", {"alpha": a, "beta": b})


def clayton_generator(theta: float) -> GeneratorSpec:
    """psi(u) = u^(-theta) - 1 for theta > 0."""
    th = float(theta)
    if not th > 0:
        raise DomainError("Clayton generator needs theta > 0")

    def psi(u):
        with np.errstate(divide="ignore"):
            return np.expm1(-th * np.log(_arr(u)))

    return GeneratorSpec(psi, lambda x: np.exp(-np.log1p(_arr(x)) / th),
                         lambda u: -th * _arr(u) ** (-th - 1), True, "clayton", {"theta": th})


# ---------------------------------------------------------------------------
# diagonals and rates
# ---------------------------------------------------------------------------


def arch_diagonal(gen: GeneratorSpec, ell: int, u):
    """delta_ell(u) = psi^{-1}(ell psi(u)) with exact endpoints.

    For a non-strict generator values of ``ell psi(u)`` beyond ``psi(0)``
    map to 0 and a :class:`NonStrictWarning` is issued.
    """
    if ell < 1:
        raise DomainError("diagonal index must be >= 1")
    u = _arr(u)
    if np.any((u < 0) | (u > 1)):
        raise DomainError("diagonal argument must lie in [0, 1]")
    if ell == 1:
        return u.copy() if u.ndim else float(u)
    x = ell * gen(np.where(u > 0, u, 1.0))
    out = np.empty(u.shape)
    interior = (u > 0) & (u < 1)
    beyond = interior & (x >= gen.psi_at_zero)
    if np.any(beyond):
        warnings.warn(f"non-strict generator {gen.name}: diagonal clamped to 0", NonStrictWarning)
    ok = interior & ~beyond
    out[ok] = gen.inverse(x[ok]) if u.ndim else gen.inverse(x)
    out[~ok] = 0.0
    out[u == 1] = 1.0
    return out if u.ndim else float(out)


def _arch_ddelta(gen: GeneratorSpec, ell: int, u):
    u = _arr(u)
    d = arch_diagonal(gen, ell, u)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = ell * gen.derivative(u) / gen.derivative(d)
    # the slope at u = 1 is the limit from the left
    near = ~np.isfinite(val)
    if np.any(near):
        val = np.where(near, derivative(lambda s: arch_diagonal(gen, ell, np.clip(s, 0, 1)), u, lower=None)
                       if u.ndim else val, val)
    return val


def arch_diagonals(gen: GeneratorSpec, r: int, u_grid=None) -> DiagonalFamily:
    """All diagonals delta_2..delta_r of the Archimedean copula, with slopes."""
    r = check_dimension(r)
    delta = [(lambda u, ell=ell: arch_diagonal(gen, ell, u)) for ell in range(2, r + 1)]
    dd = None
    if gen.psi_prime is not None:
        dd = [(lambda u, ell=ell: _arch_ddelta(gen, ell, u)) for ell in range(2, r + 1)]
    return DiagonalFamily(r, delta, ddelta=dd, u_grid=u_grid,
                          metadata={"source": "archimedean", "generator": gen.name, **gen.params})


def arch_min_survival(gen: GeneratorSpec, marg: MarginalSurvival, ell: int, t):
    """P(T_{1:A} > t) for |A| = ell."""
    return arch_diagonal(gen, ell, marg(t))


def arch_mu(gen: GeneratorSpec, marg: MarginalSurvival, ell: int, t, *, tol: float = MU_AGREEMENT):
    """Rate mu^[ell](t|0) of each of ell units while all of them survive.

    Two routes are evaluated: the slope of ``-(1/ell) log delta_ell(G(t))``
    and the ratio ``psi'(G) g / (psi'(delta) delta)``.  They must agree
    within ``tol`` (relative).  At ``t = 0`` only the one-sided difference
    is used, because the ratio is an indeterminate form there.
    """
    if ell < 1:
        raise DomainError("ell must be >= 1")
    t = _arr(t)
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    if np.any(t < 0):
        raise DomainError("time must be nonnegative")

    def logmin(s):
        return np.log(arch_diagonal(gen, ell, marg(s)))

    fd = -derivative(logmin, t, lower=0.0) / ell
    pos = t > 0
    if np.any(pos):
        tp = t[pos]
        gb = marg(tp)
        dl = arch_diagonal(gen, ell, gb)
        num, den = gen.derivative(gb), gen.derivative(dl)
        if np.any(den == 0) or np.any(~np.isfinite(den)) or np.any(~np.isfinite(num)):
            idx = int(np.flatnonzero((den == 0) | ~np.isfinite(den) | ~np.isfinite(num))[0])
            raise SingularityError(f"generator derivative degenerate at t={tp[idx]:.6g}")
        if np.any(dl <= 0):
            raise SupportError("minimum survival vanishes; rate undefined")
        ratio = num * marg.density(tp) / (den * dl)
        gap = np.abs(ratio - fd[pos])
        if np.any(gap > tol * np.maximum(1.0, np.abs(ratio))):
            idx = int(np.argmax(gap))
            raise ConsistencyError(
                f"mu routes disagree at t={tp[idx]:.6g}: ratio {ratio[idx]!r} vs difference {fd[pos][idx]!r}")
        fd[pos] = ratio
    return float(fd[0]) if scalar else fd


def schur_min_survival(marg: MarginalSurvival, ell: int, t):
    """In a Schur-constant model P(T_{1:A} > t) = G(ell t)."""
    return marg(ell * _arr(t))


def schur_mu(marg: MarginalSurvival, ell: int, t):
    """mu^[ell](t|0) = g(ell t) / G(ell t) for a Schur-constant model."""
    s = ell * _arr(t)
    gb = marg(s)
    if np.any(gb <= 0):
        raise SupportError("marginal survival vanishes at ell*t")
    return marg.density(s) / gb


def schur_marginal(gen: GeneratorSpec) -> MarginalSurvival:
    """Marginal G = psi^{-1} of the Schur-constant model with generator ``gen``."""
    if not gen.strict:
        raise ContractError("Schur-constant model needs a strict generator")

    def g(t):
        t = _arr(t)
        with np.errstate(divide="ignore", invalid="ignore"):
            return -1.0 / gen.derivative(gen.inverse(t))

    if gen.name == "power_ratio":
        a, b = gen.params["alpha"], gen.params["beta"]

        def g(t):  # noqa: F811
            t = _arr(t)
            return a * b * t ** (b - 1) * np.exp(-(a + 1) * np.log1p(t ** b))

    return MarginalSurvival(gen.inverse, g, gen)


# ---------------------------------------------------------------------------
# generator recovery
# ---------------------------------------------------------------------------


class _TabulatedGenerator:
    """psi tabulated against log u with PCHIP; linear in log u below the grid.

    The inverse solves the interpolant itself, so psi_inv(psi(u)) = u to
    rounding.
    """

    def __init__(self, u, values):
        self._x = np.log(u)
        self._fwd = PchipInterpolator(self._x, values, extrapolate=False)
        self._dfwd = self._fwd.derivative()
        self.x_min = float(self._x[0])
        self.v_max = float(values[0])
        self.slope = float(self._dfwd(self.x_min))

    def _eval(self, x):
        return np.where(x < self.x_min, self.v_max + self.slope * (x - self.x_min),
                        self._fwd(np.clip(x, self.x_min, 0.0)))

    def _deval(self, x):
        return np.where(x < self.x_min, self.slope, self._dfwd(np.clip(x, self.x_min, 0.0)))

    def psi(self, u):
        u = _arr(u)
        with np.errstate(divide="ignore"):
            x = np.log(u)
        return np.where(u >= 1, 0.0, self._eval(np.minimum(x, 0.0)))

    def psi_inv(self, v):
        v = np.clip(_arr(v), 0.0, None)
        low = v > self.v_max
        x = np.empty(v.shape)
        x[low] = self.x_min + (v[low] - self.v_max) / self.slope
        mid = ~low
        if np.any(mid):
            x[mid] = solve_monotone(self._eval, v[mid], self.x_min, 0.0, increasing=False,
                                    dfunc=self._deval, xtol=1e-15, ftol=1e-15)
        out = np.exp(x)
        return float(out) if out.ndim == 0 else out

    def psi_prime(self, u):
        u = _arr(u)
        with np.errstate(divide="ignore"):
            return self._deval(np.minimum(np.log(u), 0.0)) / u


def _recovery_grid(u_min: float, n: int) -> np.ndarray:
    lower = np.geomspace(u_min, 0.5, n // 2)
    upper = 1.0 - np.geomspace(0.5, 1e-4, n // 2)[1:]
    return np.concatenate([lower, upper, [1.0]])


def recover_generator(delta_r: Callable, r: int, m_max: int = 40, *, u_min: float = 1e-4,
                      n: int = 512, tol: float = RECOVERY_TOL, window=RECOVERY_WINDOW) -> GeneratorSpec:
    """Recover an Archimedean generator from its top diagonal section.

    psi_m(u) = r^m (1 - delta_r^{-m}(u)) is computed by iterated exact
    inversion of ``delta_r`` at the tabulation points.  Iteration stops
    when the profile psi_m / psi_m(1/2) moves by less than ``tol`` in
    sup-norm on ``window``.  The result is normalised so psi(1/2) = 1;
    the generator is only identified up to this scale.
    """
    r = check_dimension(r)
    h = 1e-6
    slope = (1.0 - float(_arr(delta_r(1.0 - h)))) / h
    if abs(slope - r) > SLOPE_RTOL * r:
        raise ContractError(f"recovery needs delta_r'(1-) = r; estimated slope {slope:.6g} for r={r}")
    u = _recovery_grid(u_min, n)
    inner = u[:-1]
    half = int(np.argmin(np.abs(inner - 0.5)))
    win = (inner >= window[0]) & (inner <= window[1])

    x = inner.copy()
    prev = None
    best = None
    converged = False
    m = 0
    for m in range(1, m_max + 1):
        x = solve_monotone(delta_r, x, x, np.ones_like(x), increasing=True, xtol=1e-16, ftol=1e-16)
        prof = float(r) ** m * (1.0 - x)
        if np.any(prof <= 0) or np.any(np.diff(prof) >= 0):
            break
        norm = prof / prof[half]
        best = norm
        if prev is not None and np.max(np.abs(norm[win] - prev[win])) < tol:
            converged = True
            break
        prev = norm
    if best is None:
        raise ConsistencyError("generator recovery failed at the first iterate")
    if not converged:
        warnings.warn(f"generator recovery did not converge after {m} iterations", ConvergenceWarning)
    tab = _TabulatedGenerator(u, np.append(best, 0.0))
    gen = GeneratorSpec(tab.psi, tab.psi_inv, tab.psi_prime, True, "recovered",
                        {"iterations": m, "converged": converged, "r": r})
    return gen
