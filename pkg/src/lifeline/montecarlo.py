"""Sequential competing-risks simulation of hazard models and goodness-of-fit
comparison of empirical estimates with closed forms.

Every row owns a counter block of a Philox stream keyed by the seed, so a
batch does not depend on how rows are split across workers.
"""
from __future__ import annotations

import hashlib
import itertools
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .core import ContractError, DomainError, LifelineError, _jsonable
from .mchr import HazardModel

MAX_TIE_RATE = 1e-4
MAX_TIE_ATTEMPTS = 64
MAX_THINNING_STEPS = 100000
DEFAULT_SIGMA = 4.0
CHUNK_ROWS = 8192


class ModelPathologyError(LifelineError):
    """Too many exact ties: the model is likely degenerate."""


def default_workers() -> int:
    env = os.environ.get("LIFELINE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ContractError(f"LIFELINE_THREADS must be an integer, got {env!r}") from None
    return 1


def model_fingerprint(model: HazardModel) -> str:
    if model.thls is not None:
        doc = model.thls.to_json()
    else:
        doc = {"name": model.name, "r": model.r}
    blob = json.dumps(doc, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class SampleBatch:
    """n draws of r failure times (0-based unit columns)."""

    n: int
    rows: np.ndarray
    seed: int
    fingerprint: str
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def r(self) -> int:
        return self.rows.shape[1]

    def orders(self) -> np.ndarray:
        """Failure order per row: column k holds the unit failing k-th."""
        return np.argsort(self.rows, axis=1, kind="stable")

    def to_csv(self, path) -> None:
        header = ",".join(f"T{j + 1}" for j in range(self.r))
        np.savetxt(path, self.rows, delimiter=",", header=header, comments="", fmt="%.17g")

    @classmethod
    def from_csv(cls, path, seed: int = -1, fingerprint: str = "") -> "SampleBatch":
        rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(len(rows), rows, seed, fingerprint, {"source": str(path)})


# ---------------------------------------------------------------------------
# random streams
# ---------------------------------------------------------------------------


def _block(r: int) -> int:
    """Uniforms reserved per row: 2r rounded up to a multiple of 4 (one Philox counter step)."""
    return -(-2 * r // 4) * 4


def _row_uniforms(seed: int, start: int, stop: int, block: int) -> np.ndarray:
    counter = np.zeros(4, dtype=np.uint64)
    counter[0] = start * block // 4
    gen = np.random.Generator(np.random.Philox(key=[seed, 0], counter=counter))
    return gen.random((stop - start) * block).reshape(stop - start, block)


def _row_generator(seed: int, stream: int, row: int, attempt: int = 0) -> np.random.Generator:
    counter = np.zeros(4, dtype=np.uint64)
    counter[1], counter[2] = row, attempt
    return np.random.Generator(np.random.Philox(key=[seed, stream], counter=counter))


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------


class _ThlsRates:
    def __init__(self, spec):
        self.spec = spec
        self.r = spec.r
        self._cache: dict = {}

    def __call__(self, prefix: tuple) -> np.ndarray:
        v = self._cache.get(prefix)
        if v is None:
            v = np.zeros(self.r)
            failed = set(prefix)
            for j in range(self.r):
                if j not in failed:
                    v[j] = self.spec.rate(prefix, j)
            self._cache[prefix] = v
        return v


def _stage_from_uniforms(rates: np.ndarray, u_pick: np.ndarray, u_time: np.ndarray):
    """Winner ~ categorical(rates / total) and waiting time ~ Exp(total) for rows sharing ``rates``."""
    total = rates.sum()
    if not total > 0:
        raise ContractError("all surviving units have zero rate; lifetimes would be infinite")
    cum = np.cumsum(rates) / total
    cum[-1] = 1.0
    winner = np.searchsorted(cum, u_pick, side="right")
    # zero-rate units have zero-width cells and are never chosen
    winner = np.minimum(winner, len(rates) - 1)
    wait = -np.log1p(-u_time) / total
    return winner, wait


def _thls_rows(rates: _ThlsRates, uni: np.ndarray) -> np.ndarray:
    m = uni.shape[0]
    r = rates.r
    times = np.zeros((m, r))
    clock = np.zeros(m)
    prefixes = [()] * m
    for k in range(r):
        groups: dict = {}
        for i, p in enumerate(prefixes):
            groups.setdefault(p, []).append(i)
        new_prefixes = list(prefixes)
        for p, idx in groups.items():
            idx = np.asarray(idx)
            winner, wait = _stage_from_uniforms(rates(p), uni[idx, 2 * k], uni[idx, 2 * k + 1])
            clock[idx] += wait
            times[idx, winner] = clock[idx]
            for i, w in zip(idx, winner):
                new_prefixes[i] = p + (int(w),)
        prefixes = new_prefixes
    return times


def _homogeneous_row(model: HazardModel, u: np.ndarray) -> np.ndarray:
    r = model.r
    times = np.zeros(r)
    history: tuple = ()
    clock = 0.0
    for k in range(r):
        surv = model.survivors(history)
        rates = np.array([model.rate(j, history, clock) for j in surv])
        winner, wait = _stage_from_uniforms(rates, u[2 * k:2 * k + 1], u[2 * k + 1:2 * k + 2])
        clock += float(wait[0])
        j = surv[int(winner[0])]
        times[j] = clock
        history = history + ((j, clock),)
    return times


def _thinning_row(model: HazardModel, gen: np.random.Generator) -> np.ndarray:
    r = model.r
    times = np.zeros(r)
    history: tuple = ()
    clock = 0.0
    for _ in range(r):
        bound = float(model.rate_bound(history))
        if not bound > 0 or not np.isfinite(bound):
            raise ContractError(f"rate bound after {history} must be positive and finite")
        for _step in range(MAX_THINNING_STEPS):
            clock += gen.exponential(1.0 / bound)
            surv = model.survivors(history)
            rates = np.array([model.rate(j, history, clock) for j in surv])
            total = rates.sum()
            if total > bound * (1 + 1e-12):
                raise ContractError(f"rate bound {bound} exceeded ({total}) after {history} at t={clock}")
            if gen.random() * bound < total:
                j = surv[int(np.searchsorted(np.cumsum(rates) / total, gen.random(), side="right").clip(
                    0, len(surv) - 1))]
                times[j] = clock
                history = history + ((j, clock),)
                break
        else:
            raise ContractError("thinning did not accept a failure; rate bound too loose")
    return times


def _bad_rows(times: np.ndarray) -> np.ndarray:
    s = np.sort(times, axis=1)
    return np.any(np.diff(s, axis=1) <= 0, axis=1) | (s[:, 0] <= 0)


def _chunk(model: HazardModel, path: str, seed: int, start: int, stop: int, block: int) -> np.ndarray:
    if path == "thinning":
        return np.array([_thinning_row(model, _row_generator(seed, 2, i)) for i in range(start, stop)])
    uni = _row_uniforms(seed, start, stop, block)
    if path == "thls":
        return _thls_rows(_ThlsRates(model.thls), uni)
    return np.array([_homogeneous_row(model, uni[i]) for i in range(stop - start)])


def _resample(model: HazardModel, path: str, seed: int, row: int, block: int) -> tuple:
    for attempt in range(1, MAX_TIE_ATTEMPTS + 1):
        gen = _row_generator(seed, 1 if path != "thinning" else 3, row, attempt)
        if path == "thinning":
            t = _thinning_row(model, gen)
        else:
            u = gen.random(block)
            t = _thls_rows(_ThlsRates(model.thls), u[None, :])[0] if path == "thls" else _homogeneous_row(model, u)
        if not _bad_rows(t[None, :])[0]:
            return t, attempt
    raise ModelPathologyError(f"row {row} keeps producing ties")


def sample(model: HazardModel, n: int, seed: int, *, workers: Optional[int] = None) -> SampleBatch:
    """Draw n independent vectors of failure times from ``model``.

    THLS models use vectorised competing-exponential stages; other
    time-homogeneous models use the same scheme row by row; time-varying
    models use thinning against ``model.rate_bound``.
    """
    n = int(n)
    if n < 1:
        raise DomainError("need at least one sample")
    seed = int(seed)
    if seed < 0:
        raise DomainError("seed must be nonnegative")
    if model.thls is not None:
        path = "thls"
    elif model.time_homogeneous:
        path = "homogeneous"
    elif model.rate_bound is not None:
        path = "thinning"
    else:
        raise ContractError("time-varying model needs a rate bound for thinning")
    workers = default_workers() if workers is None else max(1, int(workers))
    block = _block(model.r)
    bounds = list(range(0, n, CHUNK_ROWS)) + [n]
    spans = list(zip(bounds[:-1], bounds[1:]))
    if workers == 1 or len(spans) == 1:
        parts = [_chunk(model, path, seed, a, b, block) for a, b in spans]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda s: _chunk(model, path, seed, s[0], s[1], block), spans))
    rows = np.concatenate(parts)
    bad = np.flatnonzero(_bad_rows(rows))
    if len(bad) > MAX_TIE_RATE * n:
        raise ModelPathologyError(f"{len(bad)} of {n} rows have ties or zero times")
    resampled = 0
    for i in bad:
        rows[i], tries = _resample(model, path, seed, int(i), block)
        resampled += tries
    meta = {"path": path, "ties_resampled": int(len(bad)), "resample_draws": resampled, "workers": workers}
    return SampleBatch(n, rows, seed, model_fingerprint(model), meta)


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------


def parse_key(text: str) -> tuple:
    """Parse 'orderstat:2', 'marginal', 'marginal:1', 'min:1,2', 'survivor:1,3', 'psi:2,1', 'ordering:1,3,2'.

    Units are 1-based in text and 0-based in keys.
    """
    name, _, arg = text.partition(":")
    if name == "orderstat":
        return ("orderstat", int(arg))
    if name == "marginal":
        return ("marginal", int(arg) - 1 if arg else None)
    if name in ("min", "survivor", "psi", "ordering"):
        units = tuple(int(x) - 1 for x in arg.split(",") if x.strip()) if arg else ()
        if name in ("min", "survivor"):
            units = tuple(sorted(units))
        return (name, units)
    raise DomainError(f"unknown quantity {text!r}")


def format_key(key: tuple) -> str:
    name, arg = key
    if arg is None:
        return name
    if isinstance(arg, tuple):
        return f"{name}:" + ",".join(str(j + 1) for j in arg)
    if name == "marginal":
        return f"{name}:{arg + 1}"
    return f"{name}:{arg}"


@dataclass(frozen=True)
class EmpiricalReport:
    """Empirical probabilities on ``t_grid`` with binomial standard errors."""

    n: int
    r: int
    t_grid: np.ndarray
    _rows: np.ndarray = field(repr=False)
    _orders: np.ndarray = field(repr=False)

    def _alive(self) -> np.ndarray:
        return self._rows[:, :, None] > self.t_grid[None, None, :]

    def estimate(self, key) -> np.ndarray:
        """Empirical probability for ``key`` at every grid time."""
        if isinstance(key, str):
            key = parse_key(key)
        name, arg = key
        t = self.t_grid
        rows = self._rows
        if name == "orderstat":
            if not 1 <= arg <= self.r:
                raise DomainError(f"order statistic {arg} outside [1, {self.r}]")
            col = np.sort(rows, axis=1)[:, arg - 1]
            return np.mean(col[:, None] > t[None, :], axis=0)
        if name == "marginal":
            if arg is None:
                return np.mean(rows[:, :, None] > t[None, None, :], axis=(0, 1))
            return np.mean(rows[:, arg, None] > t[None, :], axis=0)
        if name == "min":
            A = list(arg)
            return np.mean(np.min(rows[:, A], axis=1)[:, None] > t[None, :], axis=0)
        if name == "survivor":
            A = set(arg)
            want = np.array([j in A for j in range(self.r)])
            alive = self._alive()
            return np.mean(np.all(alive == want[None, :, None], axis=1), axis=0)
        if name == "psi":
            j = list(arg)
            d = len(j)
            count = np.sum(rows[:, :, None] <= t[None, None, :], axis=1)
            ordered = np.all(self._orders[:, :d] == np.asarray(j, dtype=int)[None, :], axis=1) if d else \
                np.ones(self.n, dtype=bool)
            return np.mean((count == d) & ordered[:, None], axis=0)
        if name == "ordering":
            perm = np.asarray(arg, dtype=int)
            if sorted(arg) != list(range(self.r)):
                raise DomainError("ordering must list every unit once")
            p = float(np.mean(np.all(self._orders == perm[None, :], axis=1)))
            return np.full(t.shape, p)
        raise DomainError(f"unknown quantity {name!r}")

    def survivor_counts(self) -> dict:
        """Counts of every survivor set at each grid time; they sum to n."""
        alive = self._alive()
        code = np.tensordot(1 << np.arange(self.r), alive.astype(np.int64), axes=(0, 1))
        out = {}
        for mask in range(1 << self.r):
            A = tuple(j for j in range(self.r) if mask >> j & 1)
            out[A] = np.sum(code == mask, axis=0)
        return out

    def se(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return np.sqrt(p * (1 - p) / self.n)

    def to_json(self) -> dict:
        doc = {"n": self.n, "r": self.r, "t": self.t_grid}
        for k in range(1, self.r + 1):
            doc[format_key(("orderstat", k))] = self.estimate(("orderstat", k))
        doc["marginal"] = self.estimate(("marginal", None))
        return _jsonable(doc)


def empirical_stats(batch: SampleBatch, t_grid) -> EmpiricalReport:
    if batch.n < 1 or batch.rows.shape[0] == 0:
        raise ContractError("empty sample batch")
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise DomainError("time grid must be a non-empty 1-d array")
    return EmpiricalReport(batch.n, batch.r, t, batch.rows, batch.orders())


# ---------------------------------------------------------------------------
# goodness of fit
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GofVerdict:
    passed: bool
    sigma_mult: float
    max_abs_z: float
    n_tests: int
    worst: Optional[dict]
    z: dict
    note: str

    def to_json(self) -> dict:
        return _jsonable({"passed": self.passed, "sigma_mult": self.sigma_mult, "max_abs_z": self.max_abs_z,
                          "n_tests": self.n_tests, "worst": self.worst, "note": self.note,
                          "z": {format_key(k): v for k, v in self.z.items()}})


def gof_compare(analytic: Mapping, empirical: EmpiricalReport, sigma_mult: float = DEFAULT_SIGMA,
                t_grid=None) -> GofVerdict:
    """z-scores of empirical against analytic probabilities on the empirical grid.

    ``analytic`` maps quantity keys (tuples or strings) to arrays on the
    grid or to callables of the grid.  The standard error uses the analytic
    probability, so an empirical 0 or 1 does not produce a zero error.
    """
    if empirical.n < 1:
        raise ContractError("goodness of fit needs a non-empty batch")
    if t_grid is not None:
        tg = np.asarray(t_grid, dtype=float)
        if tg.shape != empirical.t_grid.shape or np.any(tg != empirical.t_grid):
            raise ContractError("analytic grid does not match the empirical grid")
    if not analytic:
        raise ContractError("nothing to compare")
    zs = {}
    worst = None
    max_z = 0.0
    n_tests = 0
    for key, val in analytic.items():
        k = parse_key(key) if isinstance(key, str) else tuple(key)
        p = np.asarray(val(empirical.t_grid) if callable(val) else val, dtype=float)
        if p.shape != empirical.t_grid.shape:
            raise ContractError(f"analytic values for {format_key(k)} do not match the grid")
        emp = empirical.estimate(k)
        se = empirical.se(np.clip(p, 0.0, 1.0))
        diff = emp - p
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(se > 0, diff / se, np.where(np.abs(diff) <= 1e-12, 0.0, np.inf))
        zs[k] = z
        n_tests += z.size
        i = int(np.argmax(np.abs(z)))
        if abs(z[i]) >= max_z:
            max_z = float(abs(z[i]))
            worst = {"quantity": format_key(k), "t": float(empirical.t_grid[i]), "analytic": float(p[i]),
                     "empirical": float(emp[i]), "z": float(z[i])}
    note = (f"{n_tests} pointwise tests at |z| <= {sigma_mult:g}; a Bonferroni-corrected family-wise "
            f"level would need |z| <= {_bonferroni(n_tests):.2f} at 0.05")
    return GofVerdict(max_z <= sigma_mult, float(sigma_mult), max_z, n_tests, worst, zs, note)


def _bonferroni(m: int) -> float:
    from scipy.stats import norm
    return float(norm.isf(0.025 / max(m, 1)))


def all_orderings(r: int) -> list:
    return [tuple(p) for p in itertools.permutations(range(r))]


def orderstat_means(batch: SampleBatch) -> tuple:
    """Sample means of the order statistics with their standard errors."""
    s = np.sort(batch.rows, axis=1)
    return s.mean(axis=0), s.std(axis=0, ddof=1) / np.sqrt(batch.n)


def survivor_set_spread(report: EmpiricalReport, size: int) -> float:
    """Largest z-score between survivor-set probabilities of equal size (pairwise against the mean)."""
    sets = list(itertools.combinations(range(report.r), size))
    est = np.array([report.estimate(("survivor", A)) for A in sets])
    mean = est.mean(axis=0)
    se = report.se(mean)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, np.abs(est - mean) / se, 0.0)
    return float(np.max(z))
