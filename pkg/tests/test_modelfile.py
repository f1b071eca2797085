import json

import numpy as np
import pytest
from conftest import paired_spec
from numpy.testing import assert_allclose

from lifeline.core import ContractError
from lifeline.modelfile import CapabilityError, ModelFileError, load_model, model_from_document

T = np.array([0.25, 1.0, 2.5])


def test_odthls_document(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps(paired_spec().to_json()))
    m = load_model(path)
    assert m.r == 3
    assert_allclose(m.orderstats().survival(2, T), (1 + T) * np.exp(-T), atol=1e-12)
    assert_allclose(m.min_survival(2, T), np.exp(-T) * (1 + T / 3), atol=1e-12)
    assert_allclose(m.psi((0,), T), T * np.exp(-T) / 3, atol=1e-12)


def test_thls_document_keys_are_sets():
    doc = {"type": "thls", "r": 3, "rates": {"": {"1": 1, "2": 1, "3": 1}, "1": {"2": 1.5, "3": 1.5},
                                             "2": {"1": 1.5, "3": 1.5}, "3": {"1": 1.5, "2": 1.5},
                                             "1,2": {"3": 4}, "1,3": {"2": 4}, "2,3": {"1": 4}}}
    m = model_from_document(doc)
    assert m.spec.rate((1, 0), 2) == 4.0
    ex = model_from_document({"type": "exchangeable_thls", "L": [3, 3, 4]})
    assert_allclose(m.orderstats().matrix(T), ex.orderstats().matrix(T), atol=1e-12)


def test_thls_missing_set():
    doc = {"type": "thls", "r": 2, "rates": {"": {"1": 1, "2": 1}, "1": {"2": 2}}}
    with pytest.raises(ModelFileError):
        model_from_document(doc)


def test_archimedean_document():
    m = model_from_document({"type": "archimedean", "family": "power_ratio", "alpha": 1, "beta": 1, "r": 3,
                             "marginal": {"kind": "exponential", "rate": 1}})
    assert m.min_survival(2, np.log(2)) == pytest.approx(1 / 3, abs=1e-12)
    assert_allclose(m.mu(2, T), np.exp(T) / (2 * np.exp(T) - 1), rtol=1e-7)
    with pytest.raises(CapabilityError):
        m.hazard()
    with pytest.raises(CapabilityError):
        m.psi((0,), T)


def test_schur_document():
    m = model_from_document({"type": "schur_constant", "family": "power_ratio", "alpha": 2, "beta": 1, "r": 3})
    assert m.mu(2, 1.0) == pytest.approx(2 / 3, rel=1e-12)


def test_tabulated_documents_roundtrip():
    t = np.linspace(0, 6, 61)
    ex = model_from_document({"type": "exchangeable_thls", "L": [1, 1, 2]})
    os_doc = {"type": "orderstats", "r": 3, "grid": t.tolist(), "values": ex.orderstats().matrix(t).tolist()}
    m = model_from_document(os_doc)
    assert_allclose(m.orderstats().matrix(t), ex.orderstats().matrix(t), atol=1e-15)
    assert_allclose(m.min_survival(2, t), ex.min_survival(2, t), atol=1e-12)
    u = np.linspace(0, 1, 101)
    dg = {"type": "diagonals", "r": 3, "grid": u.tolist(), "values": [(u ** 2).tolist(), (u ** 3).tolist()],
          "marginal": {"kind": "exponential", "rate": 2.0}}
    m = model_from_document(dg)
    # PCHIP on 101 knots of u^3 is accurate to about 1e-7 near u = 0
    assert_allclose(m.orderstats().survival(1, T), np.exp(-6 * T), atol=1e-6)


@pytest.mark.parametrize("doc,fragment", [
    ({"type": "odthls", "r": 3}, "rates"),
    ({"type": "archimedean", "family": "clayton", "theta": -1}, "theta"),
    ({"type": "exchangeable_thls", "L": [1, 2], "extra": 1}, "extra"),
    ({"type": "nope"}, "invalid"),
    ({"type": "orderstats", "r": 3, "grid": [0, 1, 2], "values": [[1, 0.5, 0.2]]}, "3 rows"),
])
def test_invalid_documents(doc, fragment):
    with pytest.raises(ModelFileError, match=fragment):
        model_from_document(doc)


def test_missing_generator_parameters():
    with pytest.raises(ModelFileError):
        model_from_document({"type": "archimedean", "family": "power_ratio", "alpha": 1})


def test_min_survival_domain():
    m = model_from_document({"type": "exchangeable_thls", "L": [1, 1, 2]})
    with pytest.raises(ContractError):
        m.min_survival(4, T)


def test_bad_json(tmp_path):
    p = tmp_path / "x.json"
    p.write_text("{not json")
    with pytest.raises(ModelFileError):
        load_model(p)
