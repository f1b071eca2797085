"""Time-homogeneous load-sharing models.

Indices are 0-based throughout the Python API.  A prefix is the tuple of
already-failed units in failure order; ``spec.rate(prefix, j)`` is the
constant hazard of unit ``j`` after that history.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.linalg import null_space

from .core import (CheckReport, ContractError, DomainError, MarginalSurvival, OrderStatFamily,
                   check_dimension, falling_factorial, min_weights, tail_time, time_grid)

CLOSED_FORM_MAX_COEF = 1e4
CONFLUENT_RTOL = 1e-9
PARTITION_RTOL = 1e-12
R3_RTOL = 1e-12


# ---------------------------------------------------------------------------
# hyperexponential laws
# ---------------------------------------------------------------------------


def _closed_coefficients(gamma: np.ndarray) -> Optional[np.ndarray]:
    k = gamma.size
    coef = np.ones(k)
    for j in range(k):
        for h in range(k):
            if h == j:
                continue
            diff = gamma[h] - gamma[j]
            if abs(diff) <= CONFLUENT_RTOL * max(gamma[h], gamma[j]):
                return None
            coef[j] *= gamma[h] / diff
    return coef


def _phase_first_row(gamma: np.ndarray, t: np.ndarray) -> np.ndarray:
    """First row of exp(Q t) for the pure-birth generator with stage rates gamma.

    exp(Q h) is summed as e^{-c h} exp((Q + cI) h) with c = max(gamma), a
    series of nonnegative matrices, for a step h = t / 2^s small enough that
    30 terms suffice; the result is then squared s times.  No step involves
    cancellation, so clustered or equal rates are as accurate as distinct ones.
    """
    k = gamma.size
    c = float(np.max(gamma))
    shift = np.diag(c - gamma) + np.diag(gamma[:-1], 1)
    flat = t.ravel()
    out = np.zeros((flat.size, k))
    finite = np.isfinite(flat)
    tf = flat[finite]
    if tf.size:
        norm = 2.0 * c * tf
        s = np.maximum(0, np.ceil(np.log2(np.maximum(norm, 1e-300) / 0.25))).astype(int)
        h = tf / 2.0 ** s
        a = shift[None, :, :] * h[:, None, None]
        term = np.broadcast_to(np.eye(k), a.shape).copy()
        total = term.copy()
        for n in range(1, 31):
            term = term @ a / n
            total += term
        mats = total * np.exp(-c * h)[:, None, None]
        for it in range(int(s.max(initial=0))):
            sel = s > it
            mats[sel] = mats[sel] @ mats[sel]
        out[finite] = mats[:, 0, :]
    return out.reshape(t.shape + (k,))


@dataclass(frozen=True)
class HyperexpParams:
    """Rates of a sum of independent exponential stages.

    ``survival(k, t)`` is P(Y_1/gamma_1 + ... + Y_k/gamma_k > t).  Rates may
    coincide; such cases use the phase-type matrix exponential.
    """

    gamma: tuple
    _memo: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        g = tuple(float(x) for x in self.gamma)
        if len(g) == 0:
            raise DomainError("need at least one rate")
        if any(not np.isfinite(x) or x <= 0 for x in g):
            raise DomainError(f"rates must be positive and finite, got {g}")
        object.__setattr__(self, "gamma", g)
        coefs, methods = [], []
        for k in range(1, len(g) + 1):
            c = _closed_coefficients(np.asarray(g[:k]))
            coefs.append(c)
            methods.append("phase" if c is None or np.max(np.abs(c)) > CLOSED_FORM_MAX_COEF else "closed")
        object.__setattr__(self, "_coefs", tuple(coefs))
        object.__setattr__(self, "_methods", tuple(methods))
        object.__setattr__(self, "_any_phase", "phase" in methods)

    @property
    def r(self) -> int:
        return len(self.gamma)

    def _check_k(self, k: int):
        if not 1 <= k <= self.r:
            raise DomainError(f"stage count {k} outside [1, {self.r}]")

    def method_for(self, k: int) -> str:
        self._check_k(k)
        return self._methods[k - 1]

    def survival(self, k: int, t, method: str = "auto"):
        self._check_k(k)
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise DomainError("hyperexponential survival needs t >= 0")
        gamma = np.asarray(self.gamma[:k])
        if method == "auto":
            method = self.method_for(k)
        if method == "closed":
            coef = self._coefs[k - 1]
            if coef is None:
                raise DomainError("closed form needs distinct rates")
            out = np.exp(-np.multiply.outer(t, gamma)) @ coef
        elif method == "phase":
            out = _phase_first_row(gamma, t).sum(axis=-1)
        else:
            raise DomainError(f"unknown method {method!r}")
        out = np.clip(out, 0.0, 1.0)
        return float(out) if out.ndim == 0 else out

    def density(self, k: int, t, method: str = "auto"):
        self._check_k(k)
        t = np.asarray(t, dtype=float)
        gamma = np.asarray(self.gamma[:k])
        if method == "auto":
            method = self.method_for(k)
        if method == "closed":
            coef = self._coefs[k - 1]
            if coef is None:
                raise DomainError("closed form needs distinct rates")
            out = np.exp(-np.multiply.outer(t, gamma)) @ (coef * gamma)
        elif method == "phase":
            out = gamma[-1] * _phase_first_row(gamma, t)[..., -1]
        else:
            raise DomainError(f"unknown method {method!r}")
        out = np.maximum(out, 0.0)
        return float(out) if out.ndim == 0 else out

    def _tables(self, t: np.ndarray):
        """Survivals and densities of every stage count at t, memoised for the last t."""
        key = (t.shape, t.tobytes())
        hit = self._memo.get("last")
        if hit is not None and hit[0] == key:
            return hit[1]
        gamma = np.asarray(self.gamma)
        if self._any_phase:
            row = _phase_first_row(gamma, t)
            surv = np.moveaxis(np.cumsum(row, axis=-1), -1, 0)
            dens = np.moveaxis(row * gamma, -1, 0)
        else:
            # all closed forms share the exponentials e^{-gamma_j t}
            e = np.exp(-np.multiply.outer(t, gamma))
            surv = np.array([e[..., :k] @ self._coefs[k - 1] for k in range(1, self.r + 1)])
            dens = np.array([e[..., :k] @ (self._coefs[k - 1] * gamma[:k]) for k in range(1, self.r + 1)])
        out = (np.clip(surv, 0.0, 1.0), np.maximum(dens, 0.0))
        self._memo["last"] = (key, out)
        return out

    def survival_all(self, t):
        """Array whose row k-1 is the k-stage survival at t."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise DomainError("hyperexponential survival needs t >= 0")
        return self._tables(t)[0]

    def density_all(self, t):
        t = np.asarray(t, dtype=float)
        return self._tables(t)[1]

    def mean(self, k: int) -> float:
        self._check_k(k)
        return float(sum(1.0 / g for g in self.gamma[:k]))


def hyperexp_survival(gamma: Sequence[float], k: int, t, method: str = "auto"):
    return HyperexpParams(tuple(gamma)).survival(k, t, method)


def hyperexp_density(gamma: Sequence[float], k: int, t, method: str = "auto"):
    return HyperexpParams(tuple(gamma)).density(k, t, method)


def _stage_survival(rates: Sequence[float], k: int, t):
    """Survival of k stages where a zero rate (absorbing) means 'never'."""
    t = np.asarray(t, dtype=float)
    if k == 0:
        return np.zeros_like(t)
    if k > len(rates) or rates[k - 1] == 0:
        return np.ones_like(t)
    return np.asarray(HyperexpParams(tuple(rates[:k])).survival(k, t))


# ---------------------------------------------------------------------------
# order-dependent THLS specifications
# ---------------------------------------------------------------------------


def _prefixes(r: int, k: int):
    return itertools.permutations(range(r), k)


@dataclass(frozen=True)
class OdThlsSpec:
    """Constant m.c.h.r. of an order-dependent time-homogeneous load-sharing model.

    ``rates`` maps each prefix tuple to a mapping from surviving unit to rate.
    """

    r: int
    rates: Mapping

    def __post_init__(self):
        r = check_dimension(self.r)
        if r > 8:
            raise DomainError("odTHLS specs enumerate all prefixes; r <= 8 supported")
        table = {}
        for k in range(r):
            for p in _prefixes(r, k):
                row = self.rates.get(p)
                if row is None:
                    raise ContractError(f"missing rates for prefix {p}")
                expected = set(range(r)) - set(p)
                if set(row) != expected:
                    raise ContractError(f"prefix {p} must list rates for exactly {sorted(expected)}")
                vals = {int(j): float(v) for j, v in row.items()}
                if any(not np.isfinite(v) or v <= 0 for v in vals.values()):
                    raise ContractError(f"rates after prefix {p} must be positive: {vals}")
                table[p] = vals
        extra = set(self.rates) - set(table)
        if extra:
            raise ContractError(f"unexpected prefixes {sorted(extra)[:3]}")
        object.__setattr__(self, "rates", table)

    def rate(self, prefix: tuple, j: int) -> float:
        return self.rates[tuple(prefix)][j]

    def total(self, prefix: tuple) -> float:
        if len(prefix) == self.r:
            return 0.0
        return float(sum(self.rates[tuple(prefix)].values()))

    def lambda_vector(self, perm: Sequence[int]) -> tuple:
        perm = tuple(perm)
        return tuple(self.total(perm[:k]) for k in range(self.r))

    def ordering_probability(self, perm: Sequence[int]) -> float:
        """P(T_{perm[0]} < ... < T_{perm[-1]}) as the product of stage choice probabilities."""
        perm = tuple(perm)
        if sorted(perm) != list(range(self.r)):
            raise DomainError(f"{perm} is not a permutation of range({self.r})")
        p = 1.0
        for k in range(self.r):
            p *= self.rate(perm[:k], perm[k]) / self.total(perm[:k])
        return p

    @property
    def order_independent(self) -> bool:
        for k in range(2, self.r):
            seen = {}
            for p in _prefixes(self.r, k):
                key = frozenset(p)
                row = self.rates[p]
                if key in seen and any(not math.isclose(row[j], seen[key][j], rel_tol=1e-12) for j in row):
                    return False
                seen.setdefault(key, row)
        return True

    @property
    def exchangeable(self) -> bool:
        return exchangeable_witness(self) is None

    def hazard_model(self):
        from .mchr import HazardModel

        def rate(j, history, t):
            return self.rate(tuple(i for i, _ in history), j)

        def cum_total(history, a, b):
            return self.total(tuple(i for i, _ in history)) * (b - a)

        return HazardModel(self.r, rate, time_homogeneous=True, order_independent=self.order_independent,
                           exchangeable_form=self.exchangeable, cumulative_total=cum_total, thls=self)

    def to_json(self) -> dict:
        out = {}
        for p, row in self.rates.items():
            key = ",".join(str(i + 1) for i in p)
            out[key] = {str(j + 1): v for j, v in sorted(row.items())}
        return {"type": "odthls", "r": self.r, "rates": out}

    @classmethod
    def from_json(cls, doc: dict) -> "OdThlsSpec":
        r = int(doc["r"])
        rates = {}
        for key, row in doc["rates"].items():
            p = tuple(int(s) - 1 for s in key.split(",")) if key else ()
            rates[p] = {int(j) - 1: float(v) for j, v in row.items()}
        return cls(r, rates)

    @classmethod
    def from_set_rates(cls, r: int, set_rates: Mapping) -> "OdThlsSpec":
        """Build from rates keyed by the (unordered) failed set, i.e. a THLS model."""
        rates = {}
        for k in range(r):
            for p in _prefixes(r, k):
                rates[p] = dict(set_rates[frozenset(p)])
        return cls(r, rates)

    @classmethod
    def from_function(cls, r: int, fn) -> "OdThlsSpec":
        rates = {}
        for k in range(r):
            for p in _prefixes(r, k):
                rates[p] = {j: float(fn(p, j)) for j in range(r) if j not in p}
        return cls(r, rates)


def exchangeable_witness(spec: OdThlsSpec) -> Optional[dict]:
    """First pair of rates that differ although the prefixes have equal length."""
    for k in range(spec.r):
        ref = None
        for p in _prefixes(spec.r, k):
            for j, v in sorted(spec.rates[p].items()):
                if ref is None:
                    ref = (p, j, v)
                elif not math.isclose(v, ref[2], rel_tol=1e-12):
                    if p == ref[0]:
                        kind = "relabel-survivor"
                    else:
                        kind = "relabel-history"
                    return {"kind": kind, "a": {"prefix": ref[0], "j": ref[1], "rate": ref[2]},
                            "b": {"prefix": p, "j": j, "rate": v}}
    return None


def ordering_witness(spec: OdThlsSpec) -> Optional[dict]:
    """First pair of orderings (lexicographic) with different probabilities."""
    perms = list(itertools.permutations(range(spec.r)))
    p0 = spec.ordering_probability(perms[0])
    for perm in perms[1:]:
        p = spec.ordering_probability(perm)
        if not math.isclose(p, p0, rel_tol=1e-12):
            return {"a": {"ordering": perms[0], "probability": p0}, "b": {"ordering": perm, "probability": p}}
    return None


# ---------------------------------------------------------------------------
# exchangeable THLS
# ---------------------------------------------------------------------------


def exchangeable_spec(L: Sequence[float]) -> OdThlsSpec:
    L = tuple(float(x) for x in L)
    r = len(L)
    return OdThlsSpec.from_function(r, lambda p, j: L[len(p)] / (r - len(p)))


@dataclass(frozen=True)
class ExThlsModel:
    """Closed forms of the exchangeable THLS model with total rates ``L``.

    ``L[k]`` is the total failure rate while ``k`` units have failed, so the
    per-unit rate is ``L[k] / (r - k)``.
    """

    L: tuple

    def __post_init__(self):
        L = tuple(float(x) for x in self.L)
        check_dimension(len(L))
        if any(not np.isfinite(x) or x <= 0 for x in L):
            raise DomainError(f"total rates must be positive, got {L}")
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "_h", HyperexpParams(L))

    @property
    def r(self) -> int:
        return len(self.L)

    @property
    def hyperexp(self) -> HyperexpParams:
        return self._h

    def mu(self, k: int) -> float:
        """Per-unit rate after k failures."""
        if not 0 <= k < self.r:
            raise DomainError(f"failure count {k} outside [0, {self.r - 1}]")
        return self.L[k] / (self.r - k)

    def orderstat_survival(self, k: int, t):
        return self.hyperexp.survival(k, t)

    def orderstat_density(self, k: int, t):
        return self.hyperexp.density(k, t)

    def marginal_survival(self, t):
        return sum(np.asarray(self.orderstat_survival(k, t)) for k in range(1, self.r + 1)) / self.r

    def marginal_density(self, t):
        return sum(np.asarray(self.orderstat_density(k, t)) for k in range(1, self.r + 1)) / self.r

    def min_survival(self, d: int, t):
        return sum(w * np.asarray(self.orderstat_survival(k, t)) for k, w in min_weights(self.r, d))

    def min_density(self, d: int, t):
        return sum(w * np.asarray(self.orderstat_density(k, t)) for k, w in min_weights(self.r, d))

    def min_rate(self, d: int, t):
        """Failure rate of the minimum over any d units."""
        return self.min_density(d, t) / self.min_survival(d, t)

    def mu_min(self, d: int, t):
        """Per-unit rate of each of d survivors given no failure before t."""
        return self.min_rate(d, t) / d

    def psi(self, d: int, t):
        """Probability that a given ordered d-tuple failed by t, in that order, and nobody else."""
        upper = _stage_survival(self.L, d + 1, t)
        lower = _stage_survival(self.L, d, t)
        return (upper - lower) / falling_factorial(self.r, d)

    def orderstats(self, grid=None) -> OrderStatFamily:
        h = self.hyperexp
        return OrderStatFamily(
            self.r,
            [(lambda t, k=k: h.survival_all(t)[k - 1]) for k in range(1, self.r + 1)],
            densities=[(lambda t, k=k: h.density_all(t)[k - 1]) for k in range(1, self.r + 1)],
            grid=grid, metadata={"source": "exchangeable_thls", "L": self.L})

    def marginal(self) -> MarginalSurvival:
        return MarginalSurvival(self.marginal_survival, self.marginal_density)

    def spec(self) -> OdThlsSpec:
        return exchangeable_spec(self.L)

    def hazard_model(self):
        return self.spec().hazard_model()


def ex_thls_model(L: Sequence[float]) -> ExThlsModel:
    return ExThlsModel(tuple(L))


# ---------------------------------------------------------------------------
# odTHLS analytics
# ---------------------------------------------------------------------------


def thls_psi(spec: OdThlsSpec, j: Sequence[int], t):
    """P(units in j failed by t in that order, all others alive) for an odTHLS model."""
    j = tuple(int(x) for x in j)
    if len(set(j)) != len(j) or any(not 0 <= x < spec.r for x in j):
        raise DomainError(f"invalid ordered index tuple {j}")
    d = len(j)
    coef = 1.0
    lam = []
    for k in range(d):
        total = spec.total(j[:k])
        coef *= spec.rate(j[:k], j[k]) / total
        lam.append(total)
    lam.append(spec.total(j))
    t = np.asarray(t, dtype=float)
    out = coef * (_stage_survival(lam, d + 1, t) - _stage_survival(lam, d, t))
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ThlsPartition:
    """Permutations grouped by their running total-rate vector."""

    r: int
    classes: dict

    @property
    def vectors(self) -> list:
        return list(self.classes)

    def sizes(self) -> dict:
        return {L: len(p) for L, p in self.classes.items()}

    @property
    def singleton(self) -> bool:
        return len(self.classes) == 1


def _same_vector(a, b, rtol=PARTITION_RTOL) -> bool:
    return all(math.isclose(x, y, rel_tol=rtol, abs_tol=0.0) for x, y in zip(a, b))


def lambda_partition(spec: OdThlsSpec) -> ThlsPartition:
    classes: dict = {}
    for perm in itertools.permutations(range(spec.r)):
        vec = spec.lambda_vector(perm)
        for key in classes:
            if _same_vector(key, vec):
                classes[key].append(perm)
                break
        else:
            classes[vec] = [perm]
    return ThlsPartition(spec.r, classes)


def _family_from_mixture(r: int, weights: list, vectors: list, grid, metadata) -> OrderStatFamily:
    hs = [HyperexpParams(v) for v in vectors]

    def surv(k):
        return lambda t: sum(w * h.survival_all(t)[k - 1] for w, h in zip(weights, hs))

    def dens(k):
        return lambda t: sum(w * h.density_all(t)[k - 1] for w, h in zip(weights, hs))

    return OrderStatFamily(r, [surv(k) for k in range(1, r + 1)],
                           densities=[dens(k) for k in range(1, r + 1)], grid=grid, metadata=metadata)


def mixture_orderstats(spec: OdThlsSpec, *, assume_min_stable: bool = False, grid=None) -> OrderStatFamily:
    """Order-statistic survivals as the permutation-count mixture over the partition.

    Valid for minimally stable specs; unless ``assume_min_stable`` is set the
    spec is checked first and a ContractError is raised if it fails.
    """
    meta = {"source": "odthls_mixture"}
    if assume_min_stable:
        meta["min_stable_assumed"] = True
    else:
        from .mchr import check_minimally_stable
        rep = check_minimally_stable(spec.hazard_model(), tol=1e-9)
        if not rep.passed:
            raise ContractError(f"spec is not minimally stable (witness {rep.witness}); "
                                "pass assume_min_stable=True to override")
    part = lambda_partition(spec)
    n = math.factorial(spec.r)
    vectors = part.vectors
    weights = [len(part.classes[v]) / n for v in vectors]
    meta["partition"] = {v: len(part.classes[v]) for v in vectors}
    return _family_from_mixture(spec.r, weights, vectors, grid, meta)


def exact_orderstats(spec: OdThlsSpec, grid=None) -> OrderStatFamily:
    """Order-statistic survivals weighting each ordering by its own probability.

    Correct for every odTHLS spec, minimally stable or not.
    """
    acc: dict = {}
    for perm in itertools.permutations(range(spec.r)):
        vec = spec.lambda_vector(perm)
        p = spec.ordering_probability(perm)
        for key in acc:
            if _same_vector(key, vec):
                acc[key] += p
                break
        else:
            acc[vec] = p
    vectors = list(acc)
    return _family_from_mixture(spec.r, [acc[v] for v in vectors], vectors, grid,
                                {"source": "odthls_exact"})


def necessary_min_stable(spec: OdThlsSpec, rtol: float = 1e-10) -> CheckReport:
    """Equal initial rates and equal total rates after each single failure."""
    r = spec.r
    total0 = spec.total(())
    first = spec.rates[()]
    worst = 0.0
    for i in range(r):
        dev = abs(first[i] - total0 / r) / (total0 / r)
        worst = max(worst, dev)
        if dev > rtol:
            return CheckReport("necessary_min_stable", False, dev,
                               {"condition": "equal initial rates", "unit": i, "rate": first[i],
                                "expected": total0 / r})
    lam1 = [spec.total((i,)) for i in range(r)]
    for i in range(1, r):
        dev = abs(lam1[i] - lam1[0]) / lam1[0]
        worst = max(worst, dev)
        if dev > rtol:
            return CheckReport("necessary_min_stable", False, dev,
                               {"condition": "equal totals after one failure", "units": (0, i),
                                "totals": (lam1[0], lam1[i])})
    return CheckReport("necessary_min_stable", True, worst, None,
                       {"initial_rate": total0 / r, "total_after_one": lam1[0]})


def _close(a, b, rtol=R3_RTOL):
    return math.isclose(a, b, rel_tol=rtol, abs_tol=0.0)


@dataclass
class R3Verdict:
    verdict: str
    params: dict = field(default_factory=dict)
    reason: str = ""

    @property
    def min_stable(self) -> bool:
        return self.verdict in ("A3", "A3'")

    def to_json(self):
        return {"verdict": self.verdict, "params": self.params, "reason": self.reason}


def check_min_stable_r3(spec: OdThlsSpec) -> R3Verdict:
    """Exact minimal-stability classification of a three-unit odTHLS spec."""
    if spec.r != 3:
        raise DomainError("check_min_stable_r3 needs r = 3")
    nec = necessary_min_stable(spec, rtol=R3_RTOL)
    if not nec.passed:
        return R3Verdict("not-min-stable", reason=str(nec.witness))
    L3 = spec.total(())
    L2 = spec.total((0,))
    pairs = [(0, 1), (0, 2), (1, 2)]
    for a, b in pairs:
        s = spec.rate((a,), b) + spec.rate((b,), a)
        if not _close(s, L2):
            return R3Verdict("not-min-stable",
                             reason=f"pair ({a + 1},{b + 1}) rates sum to {s}, expected {L2}")
    third = {(a, b): spec.rate((a, b), 3 - a - b) for a, b in itertools.permutations(range(3), 2)}
    pair_rate = {(a, b): spec.rate((a,), b) for a, b in itertools.permutations(range(3), 2)}
    values = []
    for v in third.values():
        if not any(_close(v, w) for w in values):
            values.append(v)
    g = sorted({round(pair_rate[(0, 1)], 15), round(pair_rate[(1, 0)], 15)})
    gamma1, gamma2 = (g[0], g[-1]) if len(g) == 2 else (g[0], g[0])
    if len(values) == 1:
        return R3Verdict("A3", {"L3": L3, "L2": L2, "L1": values[0], "gamma1": gamma1, "gamma2": gamma2})
    if len(values) > 2:
        return R3Verdict("not-min-stable", reason=f"{len(values)} distinct third-stage rates")
    lp, lpp = values
    # every unordered pair must carry one orientation of each third-stage value
    for a, b in pairs:
        if _close(third[(a, b)], third[(b, a)]):
            return R3Verdict("not-min-stable",
                             reason=f"pair ({a + 1},{b + 1}) has equal third-stage rates in both orders")
    # the pair rate attached to each third-stage value must not depend on the pair
    attached = {}
    for (a, b), v in third.items():
        key = 0 if _close(v, lp) else 1
        attached.setdefault(key, []).append(pair_rate[(a, b)])
    for key, rates in attached.items():
        if not all(_close(x, rates[0]) for x in rates):
            return R3Verdict("not-min-stable",
                             reason="pair rates attached to one third-stage value differ across pairs")
    return R3Verdict("A3'", {"L3": L3, "L2": L2, "L1_prime": lp, "L1_second": lpp,
                             "gamma1": attached[0][0], "gamma2": attached[1][0]})


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------


def _stage_system(r: int, k: int, L: Sequence[float], prev_prob: dict):
    """Linear system for the stage-k rates (k failures already happened).

    ``prev_prob[p]`` is the product of the rates along prefix ``p``.
    """
    prefixes = list(_prefixes(r, k))
    unknowns = [(p, j) for p in prefixes for j in range(r) if j not in p]
    index = {u: i for i, u in enumerate(unknowns)}
    rows, rhs = [], []
    for p in prefixes:
        row = np.zeros(len(unknowns))
        for j in range(r):
            if j not in p:
                row[index[(p, j)]] = 1.0
        rows.append(row)
        rhs.append(L[k])
    d = k + 1
    target = math.prod(L[:d]) / math.comb(r, d)
    for subset in itertools.combinations(range(r), d):
        row = np.zeros(len(unknowns))
        for perm in itertools.permutations(subset):
            row[index[(perm[:k], perm[k])]] += prev_prob[perm[:k]]
        rows.append(row)
        rhs.append(target)
    return unknowns, np.array(rows), np.array(rhs)


def generate_singleton_min_stable(L: Sequence[float], seed: int, uniform_frailty: bool = False,
                                  scale: Optional[float] = None) -> OdThlsSpec:
    """Random minimally stable odTHLS spec whose running total rates always equal ``L``.

    Each stage adds a random null-space direction (uniform on a ball, rejected
    until all rates stay positive) to the exchangeable solution.  ``scale``
    fixes the null-space coefficient's radius; ``0`` gives the exchangeable spec.
    With ``uniform_frailty`` and r = 3 the third-stage rates are split into
    two values per unordered pair instead; the result then has two rate vectors.
    """
    L = tuple(float(x) for x in L)
    r = check_dimension(len(L))
    if r > 6:
        raise DomainError("generator supports r <= 6")
    if any(x <= 0 for x in L):
        raise DomainError(f"total rates must be positive, got {L}")
    rng = np.random.default_rng(seed)
    notes = []
    if uniform_frailty:
        if r != 3:
            notes.append("uniform frailty randomization only defined for r = 3; exchangeable spec returned")
            return exchangeable_spec(L)
        s = rng.uniform(0.1, 0.9) if scale is None else float(scale)
        lp, lpp = L[2] * (1 + s), L[2] * (1 - s)
        rates = {(): {j: L[0] / 3 for j in range(3)}}
        for a in range(3):
            rates[(a,)] = {b: L[1] / 2 for b in range(3) if b != a}
        for a, b in itertools.combinations(range(3), 2):
            c = 3 - a - b
            first, second = (lp, lpp) if rng.random() < 0.5 else (lpp, lp)
            rates[(a, b)] = {c: first}
            rates[(b, a)] = {c: second}
        return OdThlsSpec(3, rates)

    rates: dict = {(): {j: L[0] / r for j in range(r)}}
    prob = {(): 1.0}
    for k in range(1, r):
        for p in _prefixes(r, k):
            prob[p] = prob[p[:-1]] * rates[p[:-1]][p[-1]]
        unknowns, A, b = _stage_system(r, k, L, prob)
        base = L[k] / (r - k)
        x0 = np.full(len(unknowns), base)
        ns = null_space(A)
        x = x0
        if ns.shape[1] and scale != 0:
            radius = base if scale is None else float(scale) * base
            for _ in range(100):
                z = rng.standard_normal(ns.shape[1])
                z /= np.linalg.norm(z)
                rho = radius * rng.random() ** (1.0 / ns.shape[1])
                cand = x0 + rho * (ns @ z)
                if np.all(cand > 1e-3 * base):
                    x = cand
                    break
                radius *= 0.5
            else:
                notes.append(f"stage {k}: positivity not reached, exchangeable rates kept")
        for (p, j), v in zip(unknowns, x):
            rates.setdefault(p, {})[j] = float(v)
    return OdThlsSpec(r, rates)


def conditional_orderstat_law(spec: OdThlsSpec, ordering: Sequence[int]):
    """Stage rates of (T_{1:r}, ..., T_{r:r}) given the failure ordering.

    Returns the rate tuple and the matching HyperexpParams; the survival of
    T_{k:r} given the ordering is ``params.survival(k, t)``.
    """
    ordering = tuple(int(i) for i in ordering)
    if sorted(ordering) != list(range(spec.r)):
        raise DomainError(f"{ordering} is not a permutation of range({spec.r})")
    vec = spec.lambda_vector(ordering)
    return vec, HyperexpParams(vec)


def default_time_grid(spec: OdThlsSpec, n: int = 32) -> np.ndarray:
    """Grid on (0, T*] where T* is where the last order statistic survival drops to 1e-3."""
    fam = exact_orderstats(spec, grid=np.array([0.0, 1.0, 2.0]))
    tmax = tail_time(fam.gbar_k[-1])
    return time_grid(tmax, n + 1)[1:]
