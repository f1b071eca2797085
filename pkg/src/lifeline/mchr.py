"""Multivariate conditional hazard rate engine.

A :class:`HazardModel` gives the hazard of unit ``j`` at time ``t`` given the
dynamic history, an ordered tuple of ``(index, failure_time)`` pairs.
Indices are 0-based.
"""

from __future__ import annotations

import itertools
import math
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate
from scipy.stats import qmc

from .core import CheckReport, ConsistencyError, ContractError, DomainError, check_dimension

QUAD_EPSABS = 1e-11
QUAD_EPSREL = 1e-9
QMC_LOG2_POINTS = 16


class HazardModel:
    """Conditional hazard specification.

    ``rate(j, history, t)`` must be non-negative for every unit ``j`` not in
    ``history`` and every ``t`` at or after the last failure time.
    ``cumulative_total(history, a, b)`` optionally integrates the total rate
    after ``history`` over ``[a, b]``; ``rate_bound(history)`` optionally
    bounds the total rate from ``history`` onward (used for thinning).
    """

    def __init__(self, r: int, rate: Callable, *, time_homogeneous: bool = False,
                 order_independent: bool = False, exchangeable_form: bool = False,
                 cumulative_total: Optional[Callable] = None, rate_bound: Optional[Callable] = None,
                 thls=None, name: str = ""):
        self.r = check_dimension(r)
        self._rate = rate
        self.time_homogeneous = time_homogeneous
        self.order_independent = order_independent
        self.exchangeable_form = exchangeable_form
        self._cumulative_total = cumulative_total
        self.rate_bound = rate_bound
        self.thls = thls
        self.name = name

    def _validate_history(self, history, t=None):
        idx = [i for i, _ in history]
        if len(set(idx)) != len(idx) or any(not 0 <= i < self.r for i in idx):
            raise DomainError(f"invalid history indices {idx}")
        times = [s for _, s in history]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise DomainError(f"history times must be strictly increasing: {times}")
        if t is not None and times and t < times[-1]:
            raise DomainError(f"time {t} precedes last failure {times[-1]}")

    def rate(self, j: int, history=(), t: float = 0.0) -> float:
        history = tuple(history)
        if j in {i for i, _ in history}:
            raise DomainError(f"unit {j} already failed")
        v = float(self._rate(j, history, t))
        if v < 0 or not np.isfinite(v):
            raise ContractError(f"rate of unit {j} after {history} at t={t} is {v}")
        return v

    def survivors(self, history) -> list:
        failed = {i for i, _ in history}
        return [j for j in range(self.r) if j not in failed]

    def total(self, history, t: float) -> float:
        return sum(self.rate(j, history, t) for j in self.survivors(history))

    def cumulative_total(self, history, a: float, b: float) -> float:
        if b <= a:
            return 0.0
        if not self.survivors(history):
            return 0.0
        if self._cumulative_total is not None:
            return float(self._cumulative_total(tuple(history), a, b))
        if self.time_homogeneous:
            return self.total(history, a) * (b - a)
        val, _ = integrate.quad(lambda s: self.total(history, s), a, b,
                                epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=200)
        return val


def total_rate(model: HazardModel, history=(), t: float = 0.0) -> float:
    history = tuple(history)
    model._validate_history(history, t)
    return model.total(history, t)


def joint_density(model: HazardModel, x: Sequence[float]) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != (model.r,):
        raise DomainError(f"need {model.r} coordinates, got shape {x.shape}")
    if np.any(x <= 0):
        raise DomainError("coordinates must be positive")
    if np.unique(x).size != x.size:
        raise DomainError("tied coordinates: the density is only defined without ties")
    order = np.argsort(x, kind="stable")
    return _path_density(model, tuple(int(i) for i in order), x[order], None)


def _path_density(model: HazardModel, j: tuple, times, t_end: Optional[float]) -> float:
    """Density of the ordered failures j at the given times, times survival of the rest to t_end."""
    history = ()
    prev = 0.0
    dens = 1.0
    for unit, s in zip(j, times):
        s = float(s)
        dens *= model.rate(unit, history, s) * math.exp(-model.cumulative_total(history, prev, s))
        history = history + ((unit, s),)
        prev = s
        if dens == 0.0:
            return 0.0
    if t_end is not None:
        dens *= math.exp(-model.cumulative_total(history, prev, t_end))
    return dens


def _psi_nested(model: HazardModel, j: tuple, t: float, order: str) -> float:
    d = len(j)

    def integrand(*times):
        return _path_density(model, j, sorted(times), t)

    # nquad lists variables innermost first; a callable range receives the
    # outer variables, the nearest one first
    if order == "forward":
        # outermost variable is the first failure time, inner ones follow it
        def inner(*outer):
            return (outer[0], t)
    elif order == "backward":
        # outermost variable is the last failure time, inner ones precede it
        def inner(*outer):
            return (0.0, outer[0])
    else:
        raise DomainError(f"unknown integration order {order!r}")
    ranges = [inner] * (d - 1) + [[0.0, t]]
    opts = {"epsabs": QUAD_EPSABS, "epsrel": QUAD_EPSREL, "limit": 100}
    val, _ = integrate.nquad(integrand, ranges, opts=opts)
    return float(val)


def _psi_qmc(model: HazardModel, j: tuple, t: float, seed: int = 0, return_error: bool = False):
    d = len(j)
    reps = 4
    m = QMC_LOG2_POINTS - 2
    estimates = []
    for rep in range(reps):
        pts = qmc.Sobol(d, scramble=True, seed=seed + rep).random_base2(m)
        pts = np.sort(pts, axis=1) * t
        vals = np.array([_path_density(model, j, row, t) for row in pts])
        estimates.append(vals.mean() * t ** d / math.factorial(d))
    est = float(np.mean(estimates))
    err = float(np.std(estimates, ddof=1) / math.sqrt(reps))
    return (est, err) if return_error else est


def _check_tuple(model: HazardModel, j) -> tuple:
    j = tuple(int(x) for x in j)
    if len(set(j)) != len(j):
        raise DomainError(f"repeated indices in {j}")
    if any(not 0 <= x < model.r for x in j):
        raise DomainError(f"index out of range in {j}")
    return j


def psi(model: HazardModel, j: Sequence[int], t, *, method: str = "auto", order: str = "forward"):
    """P(units j failed by t in the given order, every other unit alive at t).

    ``method`` is ``auto`` (closed form for odTHLS models, nested quadrature
    for up to three failures, QMC beyond), ``quad``, ``qmc`` or ``closed``.
    ``order`` selects the nesting of the quadrature: ``forward`` integrates
    the first failure time outermost, ``backward`` the last one.
    """
    j = _check_tuple(model, j)
    if method == "auto":
        if model.thls is not None:
            method = "closed"
        else:
            method = "quad" if len(j) <= 3 else "qmc"
    if method == "closed":
        if model.thls is None:
            raise ContractError("closed-form Psi needs an odTHLS model")
        from .loadsharing import thls_psi
        return thls_psi(model.thls, j, t)
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise DomainError("t must be non-negative")
    out = np.empty(t_arr.shape)
    for idx, tv in np.ndenumerate(t_arr):
        tv = float(tv)
        if len(j) == 0:
            out[idx] = math.exp(-model.cumulative_total((), 0.0, tv))
        elif tv == 0:
            out[idx] = 0.0
        elif method == "quad":
            out[idx] = _psi_nested(model, j, tv, order)
        elif method == "qmc":
            out[idx] = _psi_qmc(model, j, tv)
        else:
            raise DomainError(f"unknown method {method!r}")
    return float(out) if out.ndim == 0 else out


def _subset(model: HazardModel, A) -> tuple:
    A = tuple(sorted(int(a) for a in A))
    if len(set(A)) != len(A) or any(not 0 <= a < model.r for a in A):
        raise DomainError(f"invalid subset {A}")
    return A


def failed_set_prob(model: HazardModel, F, t, **kw):
    """Sum of Psi over all orderings of the failed set F."""
    F = _subset(model, F)
    return sum(np.asarray(psi(model, perm, t, **kw)) for perm in itertools.permutations(F))


def survivor_set_prob(model: HazardModel, A, t, **kw):
    """P(exactly the units in A are alive at t)."""
    A = _subset(model, A)
    F = tuple(i for i in range(model.r) if i not in A)
    out = failed_set_prob(model, F, t, **kw)
    out = np.asarray(out, dtype=float)
    return float(out) if out.ndim == 0 else out


def min_survival(model: HazardModel, A, t, tol: float = 1e-7, **kw):
    """P(all units in A alive at t), summing survivor-set probabilities over supersets."""
    A = _subset(model, A)
    if not A:
        raise DomainError("A must be nonempty")
    rest = [i for i in range(model.r) if i not in A]
    total = 0.0
    for k in range(len(rest) + 1):
        for extra in itertools.combinations(rest, k):
            total = total + np.asarray(survivor_set_prob(model, A + extra, t, **kw))
    if len(A) == model.r:
        t_arr = np.asarray(t, dtype=float)
        direct = np.vectorize(lambda s: math.exp(-model.cumulative_total((), 0.0, float(s))))(t_arr)
        if np.max(np.abs(direct - total)) > tol:
            raise ConsistencyError(f"survival of the overall minimum disagrees: {direct} vs {total}")
    total = np.asarray(total, dtype=float)
    return float(total) if total.ndim == 0 else total


def check_exchangeable(model: HazardModel, probe_budget: int = 10000, seed: int = 0) -> CheckReport:
    """Test invariance of the rates under relabelling of units.

    odTHLS models are enumerated exhaustively; other models are probed at
    random histories and times.  On odTHLS failure the report also carries
    the first pair of orderings with different probabilities.
    """
    if model.thls is not None:
        from .loadsharing import exchangeable_witness, ordering_witness
        w = exchangeable_witness(model.thls)
        if w is None:
            return CheckReport("exchangeable", True, 0.0, None, {"mode": "enumerated"})
        dev = abs(w["a"]["rate"] - w["b"]["rate"])
        return CheckReport("exchangeable", False, dev, w,
                           {"mode": "enumerated", "ordering_witness": ordering_witness(model.thls)})
    rng = np.random.default_rng(seed)
    r = model.r
    worst = 0.0
    for _ in range(probe_budget):
        k = int(rng.integers(0, r))
        units = rng.permutation(r)
        times = np.sort(rng.exponential(1.0, size=k)) if k else np.array([])
        history = tuple((int(units[i]), float(times[i])) for i in range(k))
        t = float((times[-1] if k else 0.0) + rng.exponential(1.0))
        j = int(units[k + int(rng.integers(0, r - k))])
        sigma = rng.permutation(r)
        h2 = tuple((int(sigma[i]), s) for i, s in history)
        a = model.rate(j, history, t)
        b = model.rate(int(sigma[j]), h2, t)
        dev = abs(a - b)
        worst = max(worst, dev)
        if dev > 1e-12 * max(1.0, abs(a), abs(b)):
            return CheckReport("exchangeable", False, dev,
                               {"history": history, "j": j, "t": t, "rate": a,
                                "relabelled_history": h2, "relabelled_j": int(sigma[j]), "relabelled_rate": b},
                               {"mode": "probed", "probes": probe_budget})
    return CheckReport("exchangeable", True, worst, None, {"mode": "probed", "probes": probe_budget})


def check_minimally_stable(model: HazardModel, time_grid=None, tol: float = 1e-7) -> CheckReport:
    """Compare failed-set probabilities across subsets of equal size on a time grid.

    The verdict only covers the grid times; it is not a proof.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    if time_grid is None:
        if model.thls is not None:
            from .loadsharing import default_time_grid
            time_grid = default_time_grid(model.thls)
        else:
            time_grid = np.linspace(0.0, 5.0, 17)[1:]
    grid = np.asarray(time_grid, dtype=float)
    worst = 0.0
    witness = None
    for c in range(1, model.r):
        subsets = list(itertools.combinations(range(model.r), c))
        vals = np.array([np.atleast_1d(failed_set_prob(model, F, grid)) for F in subsets])
        hi, lo = vals.argmax(axis=0), vals.argmin(axis=0)
        spread = vals.max(axis=0) - vals.min(axis=0)
        i = int(np.argmax(spread))
        if spread[i] > worst:
            worst = float(spread[i])
            witness = {"size": c, "A": subsets[hi[i]], "B": subsets[lo[i]], "t": float(grid[i]),
                       "prob_A": float(vals[hi[i], i]), "prob_B": float(vals[lo[i], i])}
    passed = worst <= tol
    return CheckReport("minimally_stable", passed, worst, None if passed else witness,
                       {"grid_points": int(grid.size), "tol": tol, "grid_limited": True})
