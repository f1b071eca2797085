import itertools
import math

import numpy as np
import pytest
from conftest import paired_closed_forms, paired_spec
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from lifeline.core import ContractError, DomainError
from lifeline.loadsharing import (HyperexpParams, OdThlsSpec, check_min_stable_r3, conditional_orderstat_law,
                                  ex_thls_model, exact_orderstats, exchangeable_spec,
                                  generate_singleton_min_stable, hyperexp_survival, lambda_partition,
                                  mixture_orderstats, necessary_min_stable, thls_psi)
from lifeline.mchr import check_exchangeable, check_minimally_stable

T = np.linspace(0.0, 5.0, 64)


def test_hyperexp_single_stage():
    assert_allclose(hyperexp_survival([2.0], 1, T), np.exp(-2 * T))


def test_hyperexp_erlang():
    h = HyperexpParams((1.5, 1.5, 1.5))
    assert h.method_for(3) == "phase"
    want = np.exp(-1.5 * T) * (1 + 1.5 * T + (1.5 * T) ** 2 / 2)
    assert_allclose(h.survival(3, T), want, atol=1e-13)
    assert_allclose(h.density(3, T), 1.5 ** 3 * T ** 2 / 2 * np.exp(-1.5 * T), atol=1e-13)


def test_hyperexp_closed_matches_phase():
    h = HyperexpParams((0.7, 2.0, 3.1, 1.2))
    for k in range(1, 5):
        assert_allclose(h.survival(k, T, "closed"), h.survival(k, T, "phase"), atol=1e-12)
        assert_allclose(h.density(k, T, "closed"), h.density(k, T, "phase"), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.2, 5.0), st.sampled_from([1e-4, 1e-6, 1e-8]))
def test_hyperexp_continuous_near_coincident_rates(a, eps):
    near = HyperexpParams((a, a * (1 + eps), 2 * a))
    exact = HyperexpParams((a, a, 2 * a))
    for k in (2, 3):
        assert_allclose(near.survival(k, T), exact.survival(k, T), atol=10 * eps + 1e-9)


def test_hyperexp_mean():
    assert HyperexpParams((1.0, 2.0, 4.0)).mean(3) == pytest.approx(1.75)


def test_hyperexp_rejects_bad_rates():
    with pytest.raises(DomainError):
        HyperexpParams((1.0, -1.0))
    with pytest.raises(DomainError):
        HyperexpParams((1.0,)).survival(1, -0.5)


def test_paired_closed_forms():
    spec = paired_spec()
    fam = exact_orderstats(spec, grid=T)
    want = paired_closed_forms(T)
    for k in (1, 2, 3):
        assert_allclose(fam.survival(k, T), want[("orderstat", k)], atol=1e-12)
    assert_allclose(thls_psi(spec, (0,), T), want[("psi", (0,))], atol=1e-12)
    assert_allclose(thls_psi(spec, (0, 2), T), want[("psi", (0, 2))], atol=1e-12)


def test_paired_ordering_probabilities():
    spec = paired_spec()
    assert spec.ordering_probability((0, 1, 2)) == pytest.approx(1 / 12, abs=1e-15)
    assert spec.ordering_probability((0, 2, 1)) == pytest.approx(1 / 4, abs=1e-15)
    total = sum(spec.ordering_probability(p) for p in itertools.permutations(range(3)))
    assert total == pytest.approx(1.0)


def test_paired_is_min_stable_not_exchangeable():
    spec = paired_spec()
    assert necessary_min_stable(spec).passed
    verdict = check_min_stable_r3(spec)
    assert verdict.min_stable
    assert check_minimally_stable(spec.hazard_model(), tol=1e-9).passed
    rep = check_exchangeable(spec.hazard_model())
    assert not rep.passed
    assert rep.details["ordering_witness"] is not None


def test_symmetric_pair_rates_are_exchangeable():
    spec = paired_spec(0.5)
    assert check_exchangeable(spec.hazard_model()).passed


def test_unequal_initial_rates_fail_necessary_check():
    rates = {p: dict(v) for p, v in paired_spec().rates.items()}
    rates[()] = {0: 0.5, 1: 0.25, 2: 0.25}
    rep = necessary_min_stable(OdThlsSpec(3, rates))
    assert not rep.passed
    assert rep.witness["condition"] == "equal initial rates"


def test_non_min_stable_r3_detected():
    # unequal pair sums after the first failure
    def fn(p, j):
        if len(p) == 0:
            return 1.0
        if len(p) == 1:
            return 1.0 if (p[0], j) in ((0, 1), (1, 0)) else 0.5 if p[0] == 0 else 0.75
        return 2.0
    spec = OdThlsSpec.from_function(3, fn)
    assert not check_min_stable_r3(spec).min_stable
    assert not check_minimally_stable(spec.hazard_model(), tol=1e-9).passed


@pytest.mark.parametrize("L", [(1.0, 1.0, 2.0), (0.5, 2.0, 1.0, 3.0)])
def test_exchangeable_model_is_singleton_partition(L):
    part = lambda_partition(exchangeable_spec(L))
    assert part.singleton
    assert part.vectors[0] == pytest.approx(L)


def test_mixture_matches_exact_for_min_stable():
    spec = generate_singleton_min_stable((1.0, 1.0, 2.0), seed=3, uniform_frailty=True)
    a = mixture_orderstats(spec, grid=T)
    b = exact_orderstats(spec, grid=T)
    assert_allclose(a.matrix(T), b.matrix(T), atol=1e-12)


def test_mixture_refuses_non_min_stable():
    rates = {p: dict(v) for p, v in paired_spec().rates.items()}
    rates[()] = {0: 0.5, 1: 0.25, 2: 0.25}
    with pytest.raises(ContractError):
        mixture_orderstats(OdThlsSpec(3, rates))


def test_conditional_orderstat_law():
    vec, h = conditional_orderstat_law(paired_spec(), (0, 1, 2))
    assert vec == pytest.approx((1.0, 1.0, 2.0))
    assert_allclose(h.survival(1, T), np.exp(-T))


@pytest.mark.parametrize("seed", range(5))
def test_generator_keeps_totals(seed):
    L = (1.0, 0.5, 2.0, 1.5)
    spec = generate_singleton_min_stable(L, seed)
    for perm in itertools.permutations(range(4)):
        assert spec.lambda_vector(perm) == pytest.approx(L, rel=1e-12)
    assert necessary_min_stable(spec).passed


def test_generator_seed_determinism():
    a = generate_singleton_min_stable((1, 1, 2), 11).to_json()
    b = generate_singleton_min_stable((1, 1, 2), 11).to_json()
    assert a == b


def test_ex_thls_closed_forms():
    ex = ex_thls_model([1, 1, 2])
    t = np.array([0.5, 1.0, 2.0])
    assert_allclose(ex.orderstat_survival(2, t), (1 + t) * np.exp(-t))
    assert_allclose(ex.min_survival(2, t), np.exp(-t) * (1 + t / 3))
    assert ex.mu(2) == pytest.approx(2.0)
    # psi for a fixed ordered pair: (1/6)(t e^{-t} - e^{-t} + e^{-2t})... times 3 orderings of the third unit
    want = (t * np.exp(-t) - np.exp(-t) + np.exp(-2 * t)) / 6
    assert_allclose(ex.psi(2, t), want, atol=1e-13)


def test_odthls_json_roundtrip():
    spec = paired_spec()
    doc = spec.to_json()
    assert doc["rates"]["1"] == {"2": 0.25, "3": 0.75}
    again = OdThlsSpec.from_json(doc)
    assert again.to_json() == doc
    assert math.isclose(again.rate((0,), 2), 0.75)
