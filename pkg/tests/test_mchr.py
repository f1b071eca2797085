import numpy as np
import pytest
from conftest import paired_closed_forms, paired_spec
from numpy.testing import assert_allclose

from lifeline.core import ContractError, DomainError
from lifeline.mchr import (HazardModel, check_exchangeable, check_minimally_stable, failed_set_prob,
                           joint_density, min_survival, psi, survivor_set_prob, total_rate)


def iid_exponential(r, rate=1.0):
    return HazardModel(r, lambda j, h, t: rate, time_homogeneous=True, order_independent=True)


def weibull_load(r):
    # exchangeable, time-varying: every survivor has rate 2t (1 + number failed)
    return HazardModel(r, lambda j, h, t: 2 * t * (1 + len(h)), exchangeable_form=True,
                       cumulative_total=lambda h, a, b: (r - len(h)) * (1 + len(h)) * (b * b - a * a))


def test_psi_closed_vs_quadrature():
    m = paired_spec().hazard_model()
    t = np.array([0.5, 1.5, 3.0])
    for j in [(0,), (0, 2), (1, 0), (2, 0, 1)]:
        assert_allclose(psi(m, j, t, method="quad"), psi(m, j, t, method="closed"), atol=1e-9)


def test_psi_forward_backward_nesting_agree():
    m = weibull_load(3)
    for t in (0.4, 1.1):
        a = psi(m, (0, 1), t, method="quad", order="forward")
        b = psi(m, (0, 1), t, method="quad", order="backward")
        assert a == pytest.approx(b, abs=1e-9)


def test_psi_qmc_close_to_quadrature():
    m = weibull_load(3)
    a = psi(m, (2, 0), 0.8, method="quad")
    b = psi(m, (2, 0), 0.8, method="qmc")
    assert b == pytest.approx(a, abs=2e-4)


def test_independent_exponential_set_probabilities():
    m = iid_exponential(3)
    t = np.array([0.3, 1.0, 2.0])
    p = np.exp(-t)
    assert_allclose(survivor_set_prob(m, (0,), t), p * (1 - p) ** 2, atol=1e-12)
    assert_allclose(failed_set_prob(m, (0, 1), t), (1 - p) ** 2 * p, atol=1e-12)
    assert_allclose(min_survival(m, (0, 2), t), p ** 2, atol=1e-12)


def test_paired_minima():
    m = paired_spec().hazard_model()
    t = np.linspace(0.1, 5.0, 8)
    assert_allclose(min_survival(m, (0, 1), t), paired_closed_forms(t)[("min", (0, 1))], atol=1e-12)


def test_time_varying_overall_minimum():
    m = weibull_load(3)
    t = 0.7
    # three survivors each at rate 2s: P(T_{1:3} > t) = exp(-3 t^2)
    assert min_survival(m, (0, 1, 2), t) == pytest.approx(np.exp(-3 * t ** 2), abs=1e-8)


def test_joint_density_iid():
    m = iid_exponential(2, 1.5)
    assert joint_density(m, [0.2, 0.9]) == pytest.approx(1.5 ** 2 * np.exp(-1.5 * 1.1))
    with pytest.raises(DomainError):
        joint_density(m, [0.5, 0.5])


def test_rate_contract():
    bad = HazardModel(2, lambda j, h, t: -1.0)
    with pytest.raises(ContractError):
        bad.rate(0)
    m = iid_exponential(3)
    with pytest.raises(DomainError):
        total_rate(m, ((0, 1.0), (1, 0.5)), 2.0)
    assert total_rate(m, ((0, 1.0),), 2.0) == pytest.approx(2.0)


def test_probe_exchangeability_of_generic_models():
    assert check_exchangeable(weibull_load(3), probe_budget=500).passed
    biased = HazardModel(3, lambda j, h, t: 1.0 + (j == 0) * len(h))
    rep = check_exchangeable(biased, probe_budget=500)
    assert not rep.passed
    assert rep.witness["rate"] != rep.witness["relabelled_rate"]


def test_generic_minimal_stability_check():
    grid = np.array([0.3, 0.8, 1.5])
    assert check_minimally_stable(weibull_load(3), grid, tol=1e-7).passed
    biased = HazardModel(3, lambda j, h, t: 1.0 + (j == 0), time_homogeneous=True)
    rep = check_minimally_stable(biased, grid, tol=1e-7)
    assert not rep.passed
    assert rep.details["grid_limited"]
    assert rep.witness["size"] >= 1
