"""Command-line entry point: ``lifeline <subcommand> ...``.

Exit codes: 0 success, 2 a property check failed, 1 usage or computation error.
"""
from __future__ import annotations

import argparse
import io
import json
import os
import sys
import tempfile
import warnings
from pathlib import Path

import numpy as np

from . import archimedean as arch
from . import copulas as cop
from . import montecarlo as mc
from .convert import (diagonals_from_orderstats, diagonals_from_profile, orderstat_from_diagonals,
                      orderstats_from_profile, profile_from_diagonals, profile_from_orderstats)
from .core import LifelineError, _jsonable, tail_time, time_grid, unit_grid
from .loadsharing import default_time_grid, generate_singleton_min_stable
from .mchr import check_exchangeable, check_minimally_stable, min_survival as mchr_min_survival
from .modelfile import CapabilityError, Model, load_model, tabulated_delta

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors raised instead of exiting with status 2."""

    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, columns) -> str:
    data = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    np.savetxt(buf, data, delimiter=",", fmt="%.17g")
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def _table_json(header, columns) -> dict:
    return {name: np.asarray(c, dtype=float).tolist() for name, c in zip(header, columns)}


def _emit(args, text: str) -> None:
    if getattr(args, "out", None):
        _atomic_write(args.out, text)
    else:
        sys.stdout.write(text)


def _emit_table(args, header, columns) -> None:
    fmt = getattr(args, "format", None)
    if fmt is None:
        fmt = "json" if getattr(args, "out", None) and str(args.out).endswith(".json") else "csv"
    _emit(args, _json_text(_table_json(header, columns)) if fmt == "json" else _csv_text(header, columns))


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------


def _floats(text: str) -> list:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _units(text: str) -> tuple:
    try:
        return tuple(int(x) - 1 for x in text.split(",") if x.strip())
    except ValueError:
        raise UsageError(f"expected comma-separated 1-based unit indices, got {text!r}") from None


def _natural_time_grid(model: Model, n: int) -> np.ndarray:
    if model.spec is not None:
        return np.concatenate([[0.0], default_time_grid(model.spec, n - 1)])
    os_ = model.orderstats()
    if os_.metadata.get("source") == "table":
        return os_.grid
    return time_grid(tail_time(os_.gbar_k[-1]), n)


def _time_points(args, model: Model) -> np.ndarray:
    if args.at is not None:
        return np.asarray(_floats(args.at))
    if args.t_max is not None:
        return time_grid(args.t_max, args.grid)
    return _natural_time_grid(model, args.grid)


# ---------------------------------------------------------------------------
# convert
# ---------------------------------------------------------------------------


def _source(model: Model, kind: str):
    if kind == "orderstats":
        return model.orderstats()
    if kind == "diagonals":
        return model.diagonals()
    return model.profile()


def _diag_table(diag, marg, t) -> tuple:
    """Diagonal columns at u = G(t), with the inverse marginal and an appended u = 0 row."""
    u = np.asarray(marg(t), dtype=float)
    order = np.argsort(u)
    u, t = u[order], np.asarray(t, dtype=float)[order]
    keep = np.concatenate([[True], np.diff(u) > 0])
    u, t = u[keep], t[keep]
    if u[0] > 0:
        u, t = np.concatenate([[0.0], u]), np.concatenate([[np.inf], t])
    cols = [np.where(u > 0, diag(d, u), 0.0) for d in range(2, diag.r + 1)]
    return u, cols, t


def cmd_convert(args) -> int:
    model = load_model(args.model)
    if args.grid is not None and args.t_max is not None:
        t = time_grid(args.t_max, args.grid)
    elif model.kind == "diagonals" and model.doc == {}:
        # a diagonal table carries its time points in the inverse-marginal column
        t = np.sort(model.marginal().gbar.grid)
    else:
        t = _natural_time_grid(model, args.grid or 64)
    src = _source(model, args.src)
    # families are validated on the output knots, where tabulated inputs are exact
    u = np.unique(np.concatenate([[0.0, 1.0], np.asarray(model.marginal()(t), dtype=float)]))
    if args.to == args.src:
        target = src
    elif args.src == "orderstats":
        target = (diagonals_from_orderstats(src, u) if args.to == "diagonals"
                  else profile_from_orderstats(src, t))
    elif args.src == "diagonals":
        diag, marg = src
        target = (orderstat_from_diagonals(diag, marg, t) if args.to == "orderstats"
                  else profile_from_diagonals(diag, marg, t))
    else:
        target = orderstats_from_profile(src, t) if args.to == "orderstats" else diagonals_from_profile(src, u)
    r = model.r
    if args.to == "orderstats":
        header = ["t"] + [f"G{k}{r}" for k in range(1, r + 1)]
        cols = [t] + list(target.matrix(t))
    elif args.to == "profile":
        header = ["t"] + [f"Lambda{d}" for d in range(1, r + 1)]
        cols = [t] + [target(d, t) for d in range(1, r + 1)]
    else:
        diag, marg = target
        u, dcols, ginv = _diag_table(diag, marg, t)
        header = ["u"] + [f"delta{d}" for d in range(2, r + 1)] + ["ginv"]
        cols = [u] + dcols + [ginv]
    _emit_table(args, header, cols)
    return EXIT_OK


# ---------------------------------------------------------------------------
# check / eval / generate
# ---------------------------------------------------------------------------


def cmd_check(args) -> int:
    model = load_model(args.model)
    if model.spec is None:
        if model.kind in ("archimedean", "schur_constant"):
            report = {"check": args.property, "passed": True, "max_violation": 0.0, "witness": None,
                      "details": {"reason": f"{model.kind} models are exchangeable by construction"}}
            _emit(args, _json_text(report))
            return EXIT_OK
        raise CapabilityError(f"property checks need a conditional-hazard model; {model.kind} files have none")
    hz = model.hazard()
    if args.property == "exchangeable":
        report = check_exchangeable(hz)
    else:
        t = default_time_grid(model.spec, args.grid)
        report = check_minimally_stable(hz, t, tol=args.tol)
    _emit(args, _json_text(report.to_json()))
    return EXIT_OK if report.passed else EXIT_FAIL


def _eval_column(model: Model, quantity: str, x):
    name, _, arg = quantity.partition(":")
    try:
        if name == "marginal":
            return model.marginal()(x)
        if name == "orderstat":
            return model.orderstats().survival(int(arg), x)
        if name == "min":
            return model.min_survival(int(arg), x)
        if name == "diagonal":
            diag, _ = model.diagonals()
            return diag(int(arg), x)
        if name == "profile":
            return model.profile()(int(arg), x)
        if name == "mu":
            return model.mu(int(arg), x)
        if name == "psi":
            return model.psi(_units(arg), x)
        if name == "survivor":
            return model.survivor(_units(arg), x)
    except ValueError as exc:
        if isinstance(exc, LifelineError):
            raise
        raise UsageError(f"bad quantity argument in {quantity!r}") from None
    raise UsageError(f"unknown quantity {quantity!r}; expected marginal, orderstat:k, min:d, diagonal:d, "
                     "profile:d, mu:d, psi:j, survivor:A")


def cmd_eval(args) -> int:
    model = load_model(args.model)
    if args.quantity.startswith("diagonal"):
        x = np.asarray(_floats(args.at)) if args.at is not None else unit_grid(args.grid)
        xname = "u"
    else:
        x = _time_points(args, model)
        xname = "t"
    col = np.broadcast_to(np.asarray(_eval_column(model, args.quantity, x), dtype=float), x.shape)
    _emit_table(args, [xname, args.quantity], [x, col])
    return EXIT_OK


def cmd_generate(args) -> int:
    L = _floats(args.L)
    spec = generate_singleton_min_stable(L, args.seed, uniform_frailty=args.uniform_frailty)
    _emit(args, _json_text(spec.to_json()))
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate / gof
# ---------------------------------------------------------------------------


def _threads(args):
    return args.threads if args.threads is not None else mc.default_workers()


def cmd_simulate(args) -> int:
    model = load_model(args.model)
    batch = mc.sample(model.hazard(), args.n, args.seed, workers=_threads(args))
    header = [f"T{j + 1}" for j in range(batch.r)]
    _emit(args, _csv_text(header, batch.rows.T))
    return EXIT_OK


def analytic_quantities(model: Model) -> dict:
    """Closed-form probabilities compared by ``gof``: order statistics, marginal and minima."""
    r = model.r
    out = {f"orderstat:{k}": (lambda t, k=k: model.orderstats().survival(k, t)) for k in range(1, r + 1)}
    out["marginal"] = lambda t: model.marginal()(t)
    hz = model.hazard() if model.spec is not None else None
    for d in range(2, r + 1):
        A = tuple(range(d))
        key = "min:" + ",".join(str(j + 1) for j in A)
        if hz is not None:
            out[key] = lambda t, A=A: np.array([mchr_min_survival(hz, A, float(s)) for s in t])
        else:
            out[key] = lambda t, d=d: model.min_survival(d, t)
    return out


def cmd_gof(args) -> int:
    model = load_model(args.model)
    batch = mc.SampleBatch.from_csv(args.batch)
    if batch.r != model.r:
        raise CapabilityError(f"batch has {batch.r} columns but the model has r={model.r}")
    t = time_grid(args.t_max, args.grid + 1)[1:] if args.t_max is not None else _natural_time_grid(
        model, args.grid + 1)[1:]
    report = mc.empirical_stats(batch, t)
    verdict = mc.gof_compare(analytic_quantities(model), report, sigma_mult=args.sigma)
    _emit(args, _json_text(verdict.to_json()))
    return EXIT_OK if verdict.passed else EXIT_FAIL


# ---------------------------------------------------------------------------
# copula
# ---------------------------------------------------------------------------


def _tree(text: str) -> dict:
    p = Path(text)
    try:
        return json.loads(p.read_text()) if p.exists() else json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"copula must be a construction-tree JSON file or inline JSON ({exc})") from None


def _copula(text: str) -> cop.CopulaSpec:
    return cop.copula_from_json(_tree(text))


def cmd_copula(args) -> int:
    if args.copula_cmd == "cyclic3":
        a, b = cop.cyclic3(_copula(args.seed))
        _emit(args, _json_text((a if args.orientation == "123" else b).to_json()))
        return EXIT_OK
    if args.copula_cmd == "extend":
        pi = _units(args.pi) if args.pi else None
        K, _ = cop.extend_cyclic(_copula(args.copula), pi)
        _emit(args, _json_text(K.to_json()))
        return EXIT_OK
    if args.copula_cmd == "mix":
        try:
            K = cop.negative_mixture(_copula(args.D), _copula(args.C1), _copula(args.C2), args.alpha,
                                     d_lower=args.d_lower, c_upper=args.c_upper, force=args.force)
        except cop.BoundViolationError as exc:
            _emit(args, _json_text({"accepted": False, "reason": "bound", "message": str(exc)}))
            return EXIT_FAIL
        except cop.ConstructionError as exc:
            _emit(args, _json_text({"accepted": False, "reason": "negative_density", "message": str(exc),
                                    "witness": exc.witness}))
            return EXIT_FAIL
        _emit(args, _json_text(K.to_json()))
        return EXIT_OK
    if args.copula_cmd == "symmetrize":
        _emit(args, _json_text(cop.symmetrize(_copula(args.copula)).to_json()))
        return EXIT_OK
    K = _copula(args.copula)
    rep = cop.check_symmetries(K, args.grid, args.tol)
    wanted = {"dd": [rep.dd], "exchangeable": [rep.exchangeable], "both": [rep.dd, rep.exchangeable]}[
        args.property]
    _emit(args, _json_text(rep.to_json()))
    return EXIT_OK if all(r.passed for r in wanted) else EXIT_FAIL


# ---------------------------------------------------------------------------
# archimedean
# ---------------------------------------------------------------------------


def cmd_archimedean(args) -> int:
    model = load_model(args.model)
    if model.kind not in ("archimedean", "schur_constant"):
        raise CapabilityError(f"archimedean commands need an archimedean model, got {model.kind}")
    r = args.r or model.r
    if args.arch_cmd == "diagonals":
        if model.generator is None:
            raise CapabilityError("diagonals need a generator; recover one first")
        u = unit_grid(args.grid)
        cols = [arch.arch_diagonal(model.generator, d, u) for d in range(2, r + 1)]
        _emit_table(args, ["u"] + [f"delta{d}" for d in range(2, r + 1)], [u] + cols)
        return EXIT_OK
    if args.arch_cmd == "mu":
        if model.generator is None:
            raise CapabilityError("mu needs a generator; recover one first")
        t = np.asarray(_floats(args.at)) if args.at is not None else time_grid(args.t_max, args.grid)
        _emit_table(args, ["t", f"mu{args.ell}"], [t, model.mu(args.ell, t)])
        return EXIT_OK
    delta = tabulated_delta(model)
    gen = arch.recover_generator(delta, r, m_max=args.m_max)
    u = unit_grid(args.grid)[1:]
    _emit_table(args, ["u", "psi"], [u, gen.psi(u)])
    # roundtrip on the convergence window, reported on stderr so the table stays clean
    win = u[(u >= arch.RECOVERY_WINDOW[0]) & (u <= arch.RECOVERY_WINDOW[1])]
    err = float(np.max(np.abs(arch.arch_diagonal(gen, r, win) - delta(win))))
    sys.stderr.write(_json_text({"iterations": gen.params["iterations"], "converged": gen.params["converged"],
                                 "roundtrip_error": err}))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_grid(p, n=64, t_max=True):
    p.add_argument("--grid", type=int, default=n, help="number of grid points")
    if t_max:
        p.add_argument("--t-max", type=float, default=None, help="upper end of the time grid")


def _add_out(p, fmt=True):
    p.add_argument("--out", default=None, help="output file (default: stdout)")
    if fmt:
        p.add_argument("--format", choices=["csv", "json"], default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lifeline", description="Dependent lifetimes: conversions, checks and simulation.")
    sub = parser.add_subparsers(dest="cmd", parser_class=_Parser)
    reps = ["diagonals", "orderstats", "profile"]

    p = sub.add_parser("convert", help="convert between diagonal, order-statistic and rate-profile forms")
    p.add_argument("--from", dest="src", choices=reps, required=True)
    p.add_argument("--to", choices=reps, required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--grid", type=int, default=None)
    p.add_argument("--t-max", type=float, default=None)
    _add_out(p)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("check", help="exchangeability or minimal-stability check")
    p.add_argument("--model", required=True)
    p.add_argument("--property", choices=["exchangeable", "min-stable"], required=True)
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--grid", type=int, default=32)
    _add_out(p, fmt=False)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("eval", help="tabulate a quantity of a model")
    p.add_argument("--model", required=True)
    p.add_argument("--quantity", required=True,
                   help="marginal, orderstat:k, min:d, diagonal:d, profile:d, mu:d, psi:j, survivor:A")
    p.add_argument("--at", default=None, help="comma-separated evaluation points")
    _add_grid(p)
    _add_out(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("simulate", help="sample lifetimes from a hazard model")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--grid", type=int, default=64, help="accepted for symmetry with gof; unused by sampling")
    p.add_argument("--threads", type=int, default=None)
    _add_out(p, fmt=False)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("gof", help="compare a sample batch with the model's closed forms")
    p.add_argument("--model", required=True)
    p.add_argument("--batch", required=True)
    p.add_argument("--sigma", type=float, default=mc.DEFAULT_SIGMA)
    _add_grid(p)
    _add_out(p, fmt=False)
    p.set_defaults(func=cmd_gof)

    p = sub.add_parser("generate", help="random minimally stable odTHLS model")
    p.add_argument("--L", required=True, help="comma-separated total rates")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--uniform-frailty", action="store_true")
    _add_out(p, fmt=False)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("copula", help="diagonal-dependent copula constructions")
    csub = p.add_subparsers(dest="copula_cmd", parser_class=_Parser, required=True)
    q = csub.add_parser("cyclic3")
    q.add_argument("--seed", required=True, help="2-copula construction tree (file or inline JSON)")
    q.add_argument("--orientation", choices=["123", "321"], default="123")
    _add_out(q, fmt=False)
    q = csub.add_parser("extend")
    q.add_argument("--copula", required=True)
    q.add_argument("--pi", default=None, help="1-based permutation applied before the cyclic mixture")
    _add_out(q, fmt=False)
    q = csub.add_parser("mix")
    for name in ("D", "C1", "C2"):
        q.add_argument(f"--{name}", required=True)
    q.add_argument("--alpha", type=float, required=True)
    q.add_argument("--d-lower", type=float, required=True)
    q.add_argument("--c-upper", type=float, required=True)
    q.add_argument("--force", action="store_true")
    _add_out(q, fmt=False)
    q = csub.add_parser("symmetrize")
    q.add_argument("--copula", required=True)
    _add_out(q, fmt=False)
    q = csub.add_parser("check")
    q.add_argument("--copula", required=True)
    q.add_argument("--property", choices=["dd", "exchangeable", "both"], default="both")
    q.add_argument("--grid", type=int, default=cop.DEFAULT_GRID)
    q.add_argument("--tol", type=float, default=1e-10)
    _add_out(q, fmt=False)
    p.set_defaults(func=cmd_copula)

    p = sub.add_parser("archimedean", help="Archimedean diagonals, rates and generator recovery")
    asub = p.add_subparsers(dest="arch_cmd", parser_class=_Parser, required=True)
    q = asub.add_parser("diagonals")
    q.add_argument("--model", required=True)
    q.add_argument("--r", type=int, default=None)
    q.add_argument("--grid", type=int, default=257)
    _add_out(q)
    q = asub.add_parser("mu")
    q.add_argument("--model", required=True)
    q.add_argument("--ell", type=int, required=True)
    q.add_argument("--at", default=None)
    q.add_argument("--r", type=int, default=None)
    _add_grid(q)
    _add_out(q)
    q = asub.add_parser("recover")
    q.add_argument("--model", required=True, help="archimedean file with family tabulated_delta")
    q.add_argument("--r", type=int, default=None)
    q.add_argument("--m-max", type=int, default=40)
    q.add_argument("--grid", type=int, default=257)
    _add_out(q)
    p.set_defaults(func=cmd_archimedean)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.cmd is None:
            raise UsageError(parser.format_help())
        if getattr(args, "t_max", None) is not None and args.t_max <= 0:
            raise UsageError("--t-max must be positive")
        if getattr(args, "grid", None) is not None and args.grid < 3:
            raise UsageError("--grid needs at least 3 points")
        if args.cmd == "archimedean" and args.arch_cmd == "mu" and args.at is None and args.t_max is None:
            raise UsageError("archimedean mu needs --at or --t-max")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", arch.NonConvexWarning)
            return args.func(args)
    except UsageError as exc:
        sys.stderr.write(str(exc).rstrip() + "\n")
        return EXIT_ERROR
    except (LifelineError, ValueError, OSError) as exc:
        sys.stderr.write(f"lifeline: error: {type(exc).__name__}: {exc}\n")
        return EXIT_ERROR


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
