"""Diagonal-dependent copulas: cyclic mixtures, their recursive extension,
negative mixtures and symmetrization, with grid checks of DD and exchangeability.

Copulas are evaluated on arrays of shape ``(..., r)`` and carry a JSON
construction tree so they can be rebuilt exactly.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import CheckReport, ContractError, DomainError, LifelineError, _jsonable, check_dimension

DD_PRECHECK_TOL = 1e-9
MARGIN_TOL = 1e-10
ALPHA_TOL = 1e-10
DEFAULT_GRID = 33
FACE_POINTS = 9
SYMMETRIZE_MAX = 8


class BoundViolationError(ContractError):
    """Mixture weight exceeds the certified bound d_lower / c_upper."""


class ConstructionError(LifelineError):
    """A constructed function fails a copula check; ``witness`` locates it."""

    def __init__(self, message: str, witness: Optional[dict] = None):
        super().__init__(message)
        self.witness = witness


@dataclass(frozen=True)
class CopulaSpec:
    """An r-dimensional copula with optional density.

    ``evaluate`` and ``density`` map arrays of shape (..., r) to (...).
    ``tree`` is the JSON construction tree; ``meta`` holds derived data such
    as the cyclic coefficient row.
    """

    r: int
    evaluate: Callable
    density: Optional[Callable] = None
    tree: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        check_dimension(self.r)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if u.shape[-1] != self.r:
            raise DomainError(f"copula of dimension {self.r} evaluated at points of length {u.shape[-1]}")
        return np.asarray(self.evaluate(u), dtype=float)

    def pdf(self, u):
        if self.density is None:
            raise ContractError(f"copula {self.tree.get('kind', '?')} has no density")
        u = np.asarray(u, dtype=float)
        return np.asarray(self.density(u), dtype=float)

    def diagonal(self, A, u):
        """delta_A(u): the copula at u on coordinates A and 1 elsewhere."""
        u = np.asarray(u, dtype=float)
        pts = np.ones(u.shape + (self.r,))
        pts[..., list(A)] = u[..., None]
        return self(pts)

    def validate(self, grid_n: int = 9) -> None:
        """Uniform margins and componentwise monotonicity on a grid.

        Full r-increasingness is not checked.
        """
        u = np.linspace(0.0, 1.0, grid_n)
        for i in range(self.r):
            err = np.max(np.abs(self.diagonal([i], u) - u))
            if err > MARGIN_TOL:
                raise ConstructionError(f"margin {i} not uniform (error {err:.3g})", {"coordinate": i})
        pts = _face_points(self.r, min(grid_n, FACE_POINTS), np.random.default_rng(0))
        base = self(pts)
        for i in range(self.r):
            up = pts.copy()
            up[:, i] = np.minimum(1.0, up[:, i] + 1.0 / (grid_n - 1))
            drop = base - self(up)
            if np.any(drop > MARGIN_TOL):
                k = int(np.argmax(drop))
                raise ConstructionError(f"copula decreases in coordinate {i}", {"u": pts[k].tolist()})

    def to_json(self) -> dict:
        return _jsonable(self.tree)


# ---------------------------------------------------------------------------
# seeds
# ---------------------------------------------------------------------------


def independence(r: int) -> CopulaSpec:
    r = check_dimension(r)
    return CopulaSpec(r, lambda u: np.prod(u, axis=-1), lambda u: np.ones(u.shape[:-1]),
                      {"kind": "independence", "r": r}, {"alpha_row": [1.0] + [1.0] * (r - 1)})


def asym_poly(theta: float) -> CopulaSpec:
    """C(u,v) = uv + theta (u - u^2) sin(2 pi v) / (2 pi), |theta| <= 1.

    Density 1 + theta (1 - 2u) cos(2 pi v); asymmetric for theta != 0.
    """
    th = float(theta)
    if abs(th) > 1:
        raise DomainError("asym_poly needs |theta| <= 1")

    def ev(x):
        u, v = x[..., 0], x[..., 1]
        return u * v + th * (u - u * u) * np.sin(2 * np.pi * v) / (2 * np.pi)

    def dens(x):
        u, v = x[..., 0], x[..., 1]
        return 1.0 + th * (1 - 2 * u) * np.cos(2 * np.pi * v)

    return CopulaSpec(2, ev, dens, {"kind": "asym_poly", "theta": th}, {"alpha_row": [1.0, 0.0]})


def tabulated2(density) -> CopulaSpec:
    """Checkerboard 2-copula with constant density ``density[i, j]`` on cell (i, j).

    Row and column means of ``density`` must equal 1.
    """
    dm = np.asarray(density, dtype=float)
    n = dm.shape[0]
    if dm.ndim != 2 or dm.shape != (n, n) or n < 1:
        raise DomainError("checkerboard density must be a square matrix")
    if np.any(dm < 0):
        raise DomainError("checkerboard density must be nonnegative")
    if np.max(np.abs(dm.mean(axis=0) - 1)) > 1e-12 or np.max(np.abs(dm.mean(axis=1) - 1)) > 1e-12:
        raise DomainError("checkerboard rows and columns must average 1")
    idx = np.arange(n)

    def ev(x):
        fu = np.clip(n * x[..., 0, None] - idx, 0.0, 1.0)
        fv = np.clip(n * x[..., 1, None] - idx, 0.0, 1.0)
        return np.einsum("...i,ij,...j->...", fu, dm, fv) / (n * n)

    def dens(x):
        i = np.clip((n * x[..., 0]).astype(int), 0, n - 1)
        j = np.clip((n * x[..., 1]).astype(int), 0, n - 1)
        return dm[i, j]

    return CopulaSpec(2, ev, dens, {"kind": "tabulated2", "density": dm.tolist()}, {"alpha_row": [1.0, 0.0]})


def fgm_perturbed(r: int, theta: float, pair=(0, 1)) -> CopulaSpec:
    """Independence with an FGM factor on one pair: prod(u) (1 + theta (1-u_i)(1-u_j))."""
    r = check_dimension(r)
    th = float(theta)
    if abs(th) > 1:
        raise DomainError("FGM needs |theta| <= 1")
    i, j = pair

    def ev(x):
        return np.prod(x, axis=-1) * (1 + th * (1 - x[..., i]) * (1 - x[..., j]))

    def dens(x):
        return 1 + th * (1 - 2 * x[..., i]) * (1 - 2 * x[..., j])

    return CopulaSpec(r, ev, dens, {"kind": "fgm_perturbed", "r": r, "theta": th, "pair": list(pair)})


def transpose2(C: CopulaSpec) -> CopulaSpec:
    if C.r != 2:
        raise DomainError("transpose needs a 2-copula")
    dens = None if C.density is None else (lambda x: C.density(x[..., ::-1]))
    return CopulaSpec(2, lambda x: C.evaluate(x[..., ::-1]), dens, {"kind": "transpose", "of": C.tree},
                      dict(C.meta))


# ---------------------------------------------------------------------------
# cyclic constructions
# ---------------------------------------------------------------------------


def cyclic_coeffs(n_max: int) -> dict:
    """alpha_{n,d} for 2 <= n <= n_max as {n: [alpha_{n,1}, ..., alpha_{n,n}]}."""
    if n_max < 2:
        raise DomainError("cyclic coefficients start at n = 2")
    rows = {2: [1.0, 0.0]}
    for n in range(3, n_max + 1):
        rows[n] = next_alpha_row(rows[n - 1])
    return rows


def next_alpha_row(prev) -> list:
    n = len(prev) + 1
    p = list(prev) + [0.0]
    row = [1.0]
    for d in range(2, n + 1):
        row.append(d / n * p[d - 2] + (1 - d / n) * p[d - 1])
    return row


def _cyclic_mixture(C: CopulaSpec, order) -> CopulaSpec:
    """(1/n) sum_k C(u_{o(s_k(1))}, ..., u_{o(s_k(n-1))}) u_{o(s_k(n))} over cyclic shifts s_k."""
    n = C.r + 1
    order = list(order)
    if sorted(order) != list(range(n)):
        raise DomainError(f"ordering must be a permutation of 0..{n - 1}")
    perms = [[order[(k + i) % n] for i in range(n)] for k in range(n)]

    def ev(x):
        total = 0.0
        for p in perms:
            total = total + C.evaluate(x[..., p[:-1]]) * x[..., p[-1]]
        return total / n

    dens = None
    if C.density is not None:
        def dens(x):
            total = 0.0
            for p in perms:
                total = total + C.density(x[..., p[:-1]])
            return total / n

    return CopulaSpec(n, ev, dens)


def cyclic3(C: CopulaSpec) -> tuple:
    """The cyclic mixtures C_(1,2,3) and C_(3,2,1) of a 2-copula."""
    if C.r != 2:
        raise DomainError("cyclic3 needs a 2-copula")
    out = []
    for name, order in (("123", [0, 1, 2]), ("321", [2, 1, 0])):
        K = _cyclic_mixture(C, order)
        meta = {"alpha_row": next_alpha_row([1.0, 0.0]), "base_diag": _base_diag(C)}
        out.append(CopulaSpec(3, K.evaluate, K.density, {"kind": "cyclic3", "orientation": name, "seed": C.tree},
                              meta))
    return tuple(out)


def _base_diag(C: CopulaSpec):
    if "base_diag" in C.meta:
        return C.meta["base_diag"]
    return lambda u: C.diagonal([0, 1], u)


def extend_cyclic(C_prev: CopulaSpec, pi=None, base_diag: Optional[Callable] = None) -> tuple:
    """One step of the cyclic recursion: an n-copula from a DD (n-1)-copula.

    ``pi`` (0-based, default identity) permutes the arguments before the
    cyclic shifts.  Returns ``(C_n, alpha_row)``; ``alpha_row`` is None when
    the coefficients of ``C_prev`` are unknown.  When known, the diagonal
    closed form is checked against direct evaluation.
    """
    n = C_prev.r + 1
    report = check_dd(C_prev, tol=DD_PRECHECK_TOL)
    if not report.passed:
        raise ContractError(f"extend_cyclic needs a DD copula: {report.details.get('message', '')}")
    pi = list(range(n)) if pi is None else [int(p) for p in pi]
    K = _cyclic_mixture(C_prev, pi)
    prev_row = C_prev.meta.get("alpha_row")
    row = None if prev_row is None or len(prev_row) != n - 1 else next_alpha_row(prev_row)
    base = base_diag if base_diag is not None else C_prev.meta.get("base_diag")
    meta = {"alpha_row": row, "base_diag": base}
    tree = {"kind": "extend_cyclic", "prev": C_prev.tree, "pi": pi}
    Cn = CopulaSpec(n, K.evaluate, K.density, tree, meta)
    if row is not None and base is not None:
        u = np.linspace(0.0, 1.0, 65)
        err = alpha_diagonal_error(Cn, row, base, u)
        if err > ALPHA_TOL:
            raise ConstructionError(f"cyclic coefficients disagree with the diagonals (error {err:.3g})")
    return Cn, row


def alpha_diagonal_error(C: CopulaSpec, row, base_diag: Callable, u) -> float:
    """sup |delta_d(u) - (alpha_d u^d + (1 - alpha_d) C(u,u) u^{d-2})| over d and u."""
    u = np.asarray(u, dtype=float)
    cuu = np.asarray(base_diag(u), dtype=float)
    worst = 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        for d in range(1, C.r + 1):
            direct = C.diagonal(list(range(d)), u)
            tail = np.where(u > 0, cuu * u ** (d - 2.0), 0.0) if d >= 2 else np.zeros_like(u)
            closed = row[d - 1] * u ** d + (1 - row[d - 1]) * tail
            worst = max(worst, float(np.max(np.abs(direct - closed))))
    return worst


def cyclic_chain(seed: CopulaSpec, n: int) -> tuple:
    """Iterate the cyclic recursion from a 2-copula up to dimension n."""
    if seed.r != 2:
        raise DomainError("cyclic chain starts from a 2-copula")
    base = _base_diag(seed)
    C = CopulaSpec(2, seed.evaluate, seed.density, seed.tree, {"alpha_row": [1.0, 0.0], "base_diag": base})
    row = [1.0, 0.0]
    for _ in range(3, n + 1):
        C, row = extend_cyclic(C, None, base)
    return C, row


# ---------------------------------------------------------------------------
# mixtures and symmetrization
# ---------------------------------------------------------------------------


def _density_grid(r: int, n: int, rng) -> np.ndarray:
    mids = (np.arange(n) + 0.5) / n
    if r <= 3:
        return np.stack(np.meshgrid(*([mids] * r), indexing="ij"), axis=-1).reshape(-1, r)
    return rng.random((n ** 3, r))


def negative_mixture(D: CopulaSpec, C1: CopulaSpec, C2: CopulaSpec, alpha: float, *, d_lower: float,
                     c_upper: float, rho: Optional[Callable] = None, grid_n: int = 64,
                     force: bool = False, seed: int = 0) -> CopulaSpec:
    """K = D + alpha (C1 - C2) with the certified bound alpha <= d_lower / c_upper.

    The certificates d >= d_lower rho and c_i <= c_upper rho are checked on
    the density grid, and so is nonnegativity of the mixed density.  With
    ``force`` the bound is not enforced, so only the grid decides.
    """
    r = D.r
    if C1.r != r or C2.r != r:
        raise DomainError("mixture components must share the dimension")
    if D.density is None or C1.density is None or C2.density is None:
        raise ContractError("negative mixture needs densities for D, C1 and C2")
    alpha = float(alpha)
    if alpha < 0:
        raise DomainError("mixture weight must be nonnegative")
    if not d_lower > 0 or not c_upper > 0:
        raise DomainError("density bounds must be positive")
    bound = d_lower / c_upper
    if alpha > bound and not force:
        raise BoundViolationError(f"alpha={alpha:g} exceeds d_lower/c_upper={bound:g}")
    pts = _density_grid(r, grid_n, np.random.default_rng(seed))
    prof = np.ones(len(pts)) if rho is None else np.asarray(rho(pts), dtype=float)
    d, c1, c2 = D.pdf(pts), C1.pdf(pts), C2.pdf(pts)
    slack = 1e-12
    if np.any(d < d_lower * prof - slack):
        raise ContractError("density of D violates the certified lower bound")
    if np.any(c1 > c_upper * prof + slack) or np.any(c2 > c_upper * prof + slack):
        raise ContractError("component density violates the certified upper bound")
    k = d + alpha * (c1 - c2)
    if np.any(k < -slack):
        i = int(np.argmin(k))
        raise ConstructionError(f"mixed density negative ({k[i]:.6g}) at grid point",
                                {"u": pts[i].tolist(), "density": float(k[i]), "alpha": alpha})

    def ev(x):
        return D.evaluate(x) + alpha * (C1.evaluate(x) - C2.evaluate(x))

    def dens(x):
        return D.density(x) + alpha * (C1.density(x) - C2.density(x))

    tree = {"kind": "negative_mixture", "D": D.tree, "C1": C1.tree, "C2": C2.tree, "alpha": alpha,
            "d_lower": float(d_lower), "c_upper": float(c_upper)}
    return CopulaSpec(r, ev, dens, tree, {"min_density": float(np.min(k))})


def symmetrize(K: CopulaSpec) -> CopulaSpec:
    """Average of K over all coordinate permutations."""
    if K.r > SYMMETRIZE_MAX:
        raise DomainError(f"symmetrize enumerates r! permutations; r <= {SYMMETRIZE_MAX}")
    perms = [list(p) for p in itertools.permutations(range(K.r))]
    m = len(perms)

    def ev(x):
        return sum(K.evaluate(x[..., p]) for p in perms) / m

    dens = None
    if K.density is not None:
        def dens(x):
            return sum(K.density(x[..., p]) for p in perms) / m

    return CopulaSpec(K.r, ev, dens, {"kind": "symmetrize", "of": K.tree}, {})


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------


def _face_points(r: int, n: int, rng, faces: int = 8) -> np.ndarray:
    """Grid points on the full cube (r <= 3) or on random 3-dimensional faces."""
    g = np.linspace(0.0, 1.0, n)
    if r <= 3:
        return np.stack(np.meshgrid(*([g] * r), indexing="ij"), axis=-1).reshape(-1, r)
    chunks = []
    block = np.stack(np.meshgrid(g, g, g, indexing="ij"), axis=-1).reshape(-1, 3)
    for _ in range(faces):
        axes = rng.choice(r, size=3, replace=False)
        pts = np.ones((len(block), r))
        pts[:, axes] = block
        chunks.append(pts)
    return np.concatenate(chunks)


def check_dd(K: CopulaSpec, grid_n: int = DEFAULT_GRID, tol: float = 1e-10) -> CheckReport:
    """Diagonal dependence: delta_A depends on A only through |A|."""
    if grid_n < 8:
        raise DomainError("check grid needs at least 8 points")
    u = np.linspace(0.0, 1.0, grid_n)
    worst = 0.0
    witness = None
    for ell in range(1, K.r + 1):
        subsets = list(itertools.combinations(range(K.r), ell))
        ref = K.diagonal(subsets[0], u)
        for A in subsets[1:]:
            vals = K.diagonal(A, u)
            gap = np.abs(vals - ref)
            i = int(np.argmax(gap))
            if gap[i] > worst:
                worst = float(gap[i])
                if gap[i] > tol and witness is None:
                    witness = {"size": ell, "A": list(subsets[0]), "B": list(A), "u": float(u[i]),
                               "delta_A": float(ref[i]), "delta_B": float(vals[i])}
    passed = worst <= tol
    details = {"grid_n": grid_n, "tol": tol}
    if not passed:
        details["message"] = (f"delta differs between subsets {witness['A']} and {witness['B']} "
                              f"at u={witness['u']:.6g}")
    return CheckReport("diagonal_dependent", passed, worst, witness, details)


def check_exchangeable_copula(K: CopulaSpec, grid_n: int = DEFAULT_GRID, tol: float = 1e-10,
                              max_perms: int = 24, seed: int = 0) -> CheckReport:
    """Permutation invariance on a grid.

    Points are scanned by the number of coordinates below 1, so a failure is
    witnessed on the lowest-dimensional margin that shows it.
    """
    rng = np.random.default_rng(seed)
    n = grid_n if K.r <= 3 else FACE_POINTS
    pts = _face_points(K.r, n, rng)
    perms = [p for p in itertools.permutations(range(K.r)) if list(p) != list(range(K.r))]
    if len(perms) > max_perms:
        pick = rng.choice(len(perms), size=max_perms, replace=False)
        perms = [perms[i] for i in sorted(pick)]
    level = np.sum(pts < 1.0, axis=1)
    base = K(pts)
    worst = 0.0
    witness = None
    for lv in range(2, K.r + 1):
        sel = level == lv
        if not np.any(sel):
            continue
        for p in perms:
            other = K(pts[sel][:, list(p)])
            gap = np.abs(other - base[sel])
            i = int(np.argmax(gap))
            if gap[i] > worst:
                worst = float(gap[i])
            if gap[i] > tol and (witness is None or (witness["level"] == lv and gap[i] > witness["gap"])):
                witness = {"level": lv, "u": pts[sel][i].tolist(), "sigma": list(p),
                           "K_u": float(base[sel][i]), "K_u_sigma": float(other[i]), "gap": float(gap[i])}
        if witness is not None:
            break
    return CheckReport("exchangeable", witness is None, worst, witness,
                       {"grid_points": int(len(pts)), "permutations": len(perms), "tol": tol})


@dataclass(frozen=True)
class SymmetryReport:
    dd: CheckReport
    exchangeable: CheckReport

    def to_json(self) -> dict:
        return {"dd": self.dd.to_json(), "exchangeable": self.exchangeable.to_json()}


def check_symmetries(K: CopulaSpec, grid_n: int = DEFAULT_GRID, tol: float = 1e-10) -> SymmetryReport:
    return SymmetryReport(check_dd(K, grid_n, tol), check_exchangeable_copula(K, grid_n, tol))


# ---------------------------------------------------------------------------
# construction trees
# ---------------------------------------------------------------------------


def copula_from_json(tree: dict) -> CopulaSpec:
    """Rebuild a copula from its construction tree."""
    kind = tree.get("kind")
    if kind == "independence":
        return independence(int(tree["r"]))
    if kind == "asym_poly":
        return asym_poly(tree["theta"])
    if kind == "tabulated2":
        return tabulated2(tree["density"])
    if kind == "fgm_perturbed":
        return fgm_perturbed(int(tree["r"]), tree["theta"], tuple(tree.get("pair", (0, 1))))
    if kind == "transpose":
        return transpose2(copula_from_json(tree["of"]))
    if kind == "cyclic3":
        a, b = cyclic3(copula_from_json(tree["seed"]))
        return a if tree.get("orientation", "123") == "123" else b
    if kind == "extend_cyclic":
        return extend_cyclic(copula_from_json(tree["prev"]), tree.get("pi"))[0]
    if kind == "negative_mixture":
        return negative_mixture(copula_from_json(tree["D"]), copula_from_json(tree["C1"]),
                                copula_from_json(tree["C2"]), tree["alpha"], d_lower=tree["d_lower"],
                                c_upper=tree["c_upper"])
    if kind == "symmetrize":
        return symmetrize(copula_from_json(tree["of"]))
    raise DomainError(f"unknown copula construction {kind!r}")
