"""Model files: JSON documents validated against a schema, plus the CSV tables
emitted by the CLI (order statistics, diagonals, rate profiles).

A loaded model exposes every representation reachable from its type.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from .archimedean import (GeneratorSpec, arch_diagonals, arch_mu, clayton_generator, log_generator,
                          power_ratio_generator, schur_marginal, schur_mu)
from .convert import (diagonals_from_orderstats, exchangeable_mu, min_survival_from_diagonals,
                      orderstat_from_diagonals, orderstats_from_profile, profile_from_diagonals,
                      profile_from_orderstats, survivor_set_from_orderstats)
from .core import (ContractError, DiagonalFamily, LifelineError, MarginalSurvival, OrderStatFamily,
                   RateProfile, TabulatedFunction, exponential_marginal)
from .loadsharing import OdThlsSpec, ex_thls_model, exact_orderstats


class CapabilityError(LifelineError):
    """The requested quantity has no conversion path from the model's type."""


class ModelFileError(LifelineError):
    """The model file is malformed or fails schema validation."""


_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_R = {"type": "integer", "minimum": 2, "maximum": 12}
_ARR = {"type": "array", "items": _NUM, "minItems": 3}
_RATE_ROWS = {"type": "object", "additionalProperties": {
    "type": "object", "additionalProperties": _POS, "propertyNames": {"pattern": "^[0-9]+$"}}}
_MARGINAL = {"oneOf": [
    {"type": "object", "additionalProperties": False, "required": ["kind"],
     "properties": {"kind": {"const": "exponential"}, "rate": _POS}},
    {"type": "object", "additionalProperties": False, "required": ["kind", "grid", "values"],
     "properties": {"kind": {"const": "tabulated"}, "grid": _ARR, "values": _ARR}},
]}
_GEN_PROPS = {"family": {"enum": ["log", "power_ratio", "clayton", "tabulated_delta"]},
              "alpha": _POS, "beta": {"type": "number", "minimum": 1}, "theta": _POS}


def _variant(type_name: str, required: list, props: dict) -> dict:
    return {"type": "object", "additionalProperties": False, "required": ["type"] + required,
            "properties": {"type": {"const": type_name}, "name": {"type": "string"}, **props}}


SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "oneOf": [
        _variant("odthls", ["r", "rates"], {"r": _R, "rates": _RATE_ROWS}),
        _variant("thls", ["r", "rates"], {"r": _R, "rates": _RATE_ROWS}),
        _variant("exchangeable_thls", ["L"], {"r": _R, "L": {"type": "array", "items": _POS, "minItems": 2,
                                                             "maxItems": 12}}),
        _variant("archimedean", ["family"], {"r": _R, **_GEN_PROPS, "marginal": _MARGINAL,
                                             "grid": _ARR, "values": _ARR}),
        _variant("schur_constant", ["family"], {"r": _R, **_GEN_PROPS}),
        _variant("orderstats", ["r", "grid", "values"],
                 {"r": _R, "grid": _ARR, "values": {"type": "array", "items": _ARR}}),
        _variant("diagonals", ["r", "grid", "values", "marginal"],
                 {"r": _R, "grid": _ARR, "values": {"type": "array", "items": _ARR}, "marginal": _MARGINAL}),
    ],
}

_VALIDATOR = jsonschema.Draft202012Validator(SCHEMA)


def validate_document(doc: dict) -> None:
    errors = sorted(_VALIDATOR.iter_errors(doc), key=lambda e: list(e.path))
    if errors:
        kind = doc.get("type") if isinstance(doc, dict) else None
        # report the error from the branch matching the declared type when possible
        for e in errors:
            for sub in e.context or []:
                schema_type = sub.schema_path and SCHEMA["oneOf"][sub.schema_path[0]]["properties"]["type"]
                if schema_type and schema_type.get("const") == kind:
                    where = "/".join(str(p) for p in sub.absolute_path) or "<root>"
                    raise ModelFileError(f"{kind} model invalid at {where}: {sub.message}")
        raise ModelFileError(f"model file invalid: {errors[0].message[:300]}")


# ---------------------------------------------------------------------------
# tabulated helpers
# ---------------------------------------------------------------------------


def _tab_survival(grid, values) -> TabulatedFunction:
    return TabulatedFunction(np.asarray(grid), np.asarray(values), "time", "decreasing", left=1.0)


def _tab_marginal(doc: dict) -> MarginalSurvival:
    if doc["kind"] == "exponential":
        return exponential_marginal(doc.get("rate", 1.0))
    f = _tab_survival(doc["grid"], doc["values"])
    return MarginalSurvival(f, lambda t: -f.derivative(t))


def _marginal_from_inverse(u, ginv) -> MarginalSurvival:
    """Marginal survival tabulated from pairs (G^{-1}(u), u)."""
    u, t = np.asarray(u, dtype=float), np.asarray(ginv, dtype=float)
    ok = np.isfinite(t)
    order = np.argsort(t[ok])
    f = _tab_survival(t[ok][order], u[ok][order])
    return MarginalSurvival(f, lambda s: -f.derivative(s))


def _tab_orderstats(r: int, grid, values) -> OrderStatFamily:
    values = np.asarray(values, dtype=float)
    if values.shape != (r, len(grid)):
        raise ModelFileError(f"order-statistic table must have {r} rows of {len(grid)} values")
    fs = [_tab_survival(grid, v) for v in values]
    return OrderStatFamily(r, fs, densities=[(lambda t, f=f: -f.derivative(t)) for f in fs],
                           grid=np.asarray(grid, dtype=float), metadata={"source": "table"})


def _tab_diagonals(r: int, u, values) -> DiagonalFamily:
    values = np.asarray(values, dtype=float)
    if values.shape != (r - 1, len(u)):
        raise ModelFileError(f"diagonal table must have {r - 1} rows (delta_2..delta_r) of {len(u)} values")
    fs = [TabulatedFunction(np.asarray(u), v, "unit", "increasing", left=0.0, right=1.0) for v in values]
    return DiagonalFamily(r, fs, ddelta=[f.derivative for f in fs], u_grid=np.asarray(u, dtype=float),
                          metadata={"source": "table"})


def _tab_profile(r: int, grid, values) -> RateProfile:
    values = np.asarray(values, dtype=float)
    fs = [TabulatedFunction(np.asarray(grid), v, "time", "none") for v in values]
    return RateProfile(r, fs, grid=np.asarray(grid, dtype=float), metadata={"source": "table"})


# ---------------------------------------------------------------------------
# loaded models
# ---------------------------------------------------------------------------


def _generator(doc: dict) -> GeneratorSpec:
    fam = doc["family"]
    if fam == "log":
        return log_generator()
    if fam == "power_ratio":
        if "alpha" not in doc or "beta" not in doc:
            raise ModelFileError("power_ratio needs alpha and beta")
        return power_ratio_generator(doc["alpha"], doc["beta"])
    if fam == "clayton":
        if "theta" not in doc:
            raise ModelFileError("clayton needs theta")
        return clayton_generator(doc["theta"])
    raise CapabilityError(f"family {fam!r} does not define a generator; use 'archimedean recover'")


class Model:
    """A model file with lazy access to each representation."""

    def __init__(self, kind: str, r: int, doc: Optional[dict] = None, *, spec: Optional[OdThlsSpec] = None,
                 exchangeable=None, generator: Optional[GeneratorSpec] = None,
                 marginal: Optional[MarginalSurvival] = None, orderstats: Optional[OrderStatFamily] = None,
                 diagonals: Optional[DiagonalFamily] = None, profile: Optional[RateProfile] = None):
        self.kind = kind
        self.r = r
        self.doc = doc or {}
        self.spec = spec
        self.exchangeable = exchangeable
        self.generator = generator
        self._marginal = marginal
        self._orderstats = orderstats
        self._diagonals = diagonals
        self._profile = profile

    # representations -------------------------------------------------------

    def hazard(self):
        if self.spec is None:
            raise CapabilityError(f"no conditional-hazard representation for a {self.kind} model; "
                                  "only odthls, thls and exchangeable_thls files define one")
        return self.spec.hazard_model()

    def orderstats(self) -> OrderStatFamily:
        if self._orderstats is None:
            if self.exchangeable is not None:
                self._orderstats = self.exchangeable.orderstats()
            elif self.spec is not None:
                self._orderstats = exact_orderstats(self.spec)
            elif self._profile is not None and self._diagonals is None:
                self._orderstats = orderstats_from_profile(self._profile)
            else:
                diag, marg = self.diagonals()
                self._orderstats = orderstat_from_diagonals(diag, marg)
        return self._orderstats

    def diagonals(self) -> tuple:
        if self._diagonals is None:
            if self.generator is not None:
                self._diagonals = arch_diagonals(self.generator, self.r)
            elif self._orderstats is None and self._profile is not None:
                from .convert import diagonals_from_profile
                self._diagonals, self._marginal = diagonals_from_profile(self._profile)
            else:
                self._diagonals, self._marginal = diagonals_from_orderstats(self.orderstats())
        return self._diagonals, self.marginal()

    def marginal(self) -> MarginalSurvival:
        if self._marginal is None:
            if self.exchangeable is not None:
                self._marginal = self.exchangeable.marginal()
            elif self._diagonals is not None and self._orderstats is None and self._profile is not None:
                self.diagonals()
            else:
                from .convert import marginal_from_orderstats
                self._marginal = marginal_from_orderstats(self.orderstats())
        return self._marginal

    def profile(self) -> RateProfile:
        if self._profile is None:
            if self.generator is not None or self.kind == "diagonals":
                diag, marg = self.diagonals()
                self._profile = profile_from_diagonals(diag, marg)
            else:
                self._profile = profile_from_orderstats(self.orderstats())
        return self._profile

    # quantities ------------------------------------------------------------

    def min_survival(self, d: int, t):
        if not 1 <= d <= self.r:
            raise ContractError(f"min size {d} outside [1, {self.r}]")
        if self.generator is not None or self.kind == "diagonals":
            diag, marg = self.diagonals()
            return min_survival_from_diagonals(diag, marg, d, t)
        if self.exchangeable is not None:
            return self.exchangeable.min_survival(d, t)
        from .convert import min_survival_from_orderstats
        return min_survival_from_orderstats(self.orderstats(), d, t)

    def mu(self, d: int, t):
        if self.kind == "archimedean":
            return arch_mu(self.generator, self.marginal(), d, t)
        if self.kind == "schur_constant":
            return schur_mu(self.marginal(), d, t)
        if self.exchangeable is not None:
            return self.exchangeable.mu_min(d, t)
        return exchangeable_mu(self.profile(), d, t)

    def psi(self, j, t):
        from .loadsharing import thls_psi
        if self.spec is None:
            raise CapabilityError(f"psi needs a conditional-hazard model; {self.kind} files have none")
        return thls_psi(self.spec, j, t)

    def survivor(self, A, t):
        if self.spec is not None:
            from .mchr import survivor_set_prob
            t = np.atleast_1d(np.asarray(t, dtype=float))
            return np.array([survivor_set_prob(self.hazard(), A, float(s)) for s in t])
        return survivor_set_from_orderstats(self.orderstats(), len(A), t)


def model_from_document(doc: dict) -> Model:
    validate_document(doc)
    kind = doc["type"]
    if kind == "odthls":
        spec = OdThlsSpec.from_json(doc)
        return Model(kind, spec.r, doc, spec=spec)
    if kind == "thls":
        r = int(doc["r"])
        set_rates = {}
        for key, row in doc["rates"].items():
            A = frozenset(int(s) - 1 for s in key.split(",")) if key else frozenset()
            set_rates[A] = {int(j) - 1: float(v) for j, v in row.items()}
        try:
            spec = OdThlsSpec.from_set_rates(r, set_rates)
        except KeyError as exc:
            raise ModelFileError(f"thls rates missing failed set {sorted(i + 1 for i in exc.args[0])}") from None
        return Model(kind, r, doc, spec=spec)
    if kind == "exchangeable_thls":
        ex = ex_thls_model(doc["L"])
        if "r" in doc and doc["r"] != ex.r:
            raise ModelFileError(f"r={doc['r']} does not match {ex.r} total rates")
        return Model(kind, ex.r, doc, spec=ex.spec(), exchangeable=ex)
    if kind == "archimedean":
        r = int(doc.get("r", 3))
        if doc["family"] == "tabulated_delta":
            if "grid" not in doc or "values" not in doc:
                raise ModelFileError("tabulated_delta needs grid and values")
            return Model(kind, r, doc)
        gen = _generator(doc)
        marg = _tab_marginal(doc.get("marginal", {"kind": "exponential", "rate": 1.0}))
        return Model(kind, r, doc, generator=gen, marginal=marg)
    if kind == "schur_constant":
        r = int(doc.get("r", 3))
        gen = _generator(doc)
        return Model(kind, r, doc, generator=gen, marginal=schur_marginal(gen))
    if kind == "orderstats":
        r = int(doc["r"])
        return Model(kind, r, doc, orderstats=_tab_orderstats(r, doc["grid"], doc["values"]))
    if kind == "diagonals":
        r = int(doc["r"])
        return Model(kind, r, doc, diagonals=_tab_diagonals(r, doc["grid"], doc["values"]),
                     marginal=_tab_marginal(doc["marginal"]))
    raise ModelFileError(f"unknown model type {kind!r}")


def tabulated_delta(model: Model) -> TabulatedFunction:
    """delta_r of an archimedean ``tabulated_delta`` file."""
    if model.doc.get("family") != "tabulated_delta":
        raise CapabilityError("model does not carry a tabulated diagonal")
    return TabulatedFunction(np.asarray(model.doc["grid"]), np.asarray(model.doc["values"]), "unit",
                             "increasing", left=0.0, right=1.0)


def model_from_csv(path) -> Model:
    """Load a table written by the CLI: 't,G1r,..', 'u,delta2,..,ginv' or 't,Lambda1,..'."""
    path = Path(path)
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    cols = {name: data[:, i] for i, name in enumerate(header)}
    if header[0] == "t" and header[1].startswith("G"):
        r = len(header) - 1
        return Model("orderstats", r, orderstats=_tab_orderstats(r, cols["t"], data[:, 1:].T))
    if header[0] == "u" and header[-1] == "ginv":
        r = len(header) - 1
        diag = _tab_diagonals(r, cols["u"], data[:, 1:-1].T)
        return Model("diagonals", r, diagonals=diag, marginal=_marginal_from_inverse(cols["u"], cols["ginv"]))
    if header[0] == "t" and header[1].startswith("Lambda"):
        r = len(header) - 1
        return Model("profile", r, profile=_tab_profile(r, cols["t"], data[:, 1:].T))
    raise ModelFileError(f"unrecognised table header {','.join(header)}")


def load_model(path) -> Model:
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return model_from_csv(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ModelFileError(f"{path}: model file must be a JSON object")
    return model_from_document(doc)
