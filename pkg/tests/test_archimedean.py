import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from lifeline.archimedean import (GeneratorSpec, NonConvexWarning, SingularityError, arch_diagonal,
                                  arch_diagonals, arch_min_survival, arch_mu, clayton_generator, log_generator,
                                  power_ratio_generator, recover_generator, schur_marginal, schur_min_survival,
                                  schur_mu)
from lifeline.convert import min_survival_from_diagonals, orderstat_from_diagonals
from lifeline.core import ContractError, DomainError, exponential_marginal

U = np.linspace(0.02, 0.98, 49)


def test_log_generator_gives_independence():
    g = log_generator()
    for ell in (2, 3, 5):
        assert_allclose(arch_diagonal(g, ell, U), U ** ell, rtol=1e-13)


def test_clayton_diagonal():
    g = clayton_generator(1.0)
    assert_allclose(arch_diagonal(g, 3, U), U / (3 - 2 * U), rtol=1e-12)


def test_endpoints_exact():
    g = clayton_generator(2.0)
    assert arch_diagonal(g, 3, 0.0) == 0.0
    assert arch_diagonal(g, 3, 1.0) == 1.0


def test_power_ratio_value():
    assert arch_diagonal(power_ratio_generator(1, 1), 2, 0.5) == pytest.approx(1 / 3, abs=1e-15)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("beta", [1.0, 2.0])
def test_power_ratio_min_survival_closed_form(alpha, beta):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonConvexWarning)
        g = power_ratio_generator(alpha, beta)
    m = exponential_marginal()
    t = np.array([0.25, 1.0, 2.0])
    for ell in (2, 3):
        want = (ell ** beta * np.exp(t / alpha) - ell ** beta + 1) ** (-alpha)
        assert_allclose(arch_min_survival(g, m, ell, t), want, atol=1e-12)


def test_power_ratio_beta_two_is_not_convex():
    with pytest.warns(NonConvexWarning):
        g = power_ratio_generator(1.0, 2.0)
    assert g.params["convex"] is False
    assert power_ratio_generator(1.0, 1.0).params["convex"] is True


def test_generator_validation():
    with pytest.raises(ContractError):
        GeneratorSpec(lambda u: 1 - np.asarray(u) + 0.1, lambda x: 1.1 - np.asarray(x), strict=False)
    with pytest.raises(ContractError):
        # strict declared but psi(0+) finite
        GeneratorSpec(lambda u: 1 - np.asarray(u), lambda x: 1 - np.asarray(x), strict=True)
    with pytest.raises(DomainError):
        clayton_generator(-1.0)


def test_non_strict_generator_clamps():
    g = GeneratorSpec(lambda u: 1 - np.asarray(u), lambda x: np.clip(1 - np.asarray(x), 0, 1), strict=False)
    with pytest.warns(Warning):
        v = arch_diagonal(g, 2, np.array([0.2, 0.8]))
    assert_allclose(v, [0.0, 0.6], atol=1e-15)


def test_scaled_generator_same_diagonal():
    g = clayton_generator(1.5)
    assert_allclose(arch_diagonal(g.scaled(7.0), 3, U), arch_diagonal(g, 3, U), rtol=1e-12)


def test_arch_mu_matches_log_derivative():
    g = power_ratio_generator(1, 1)
    m = exponential_marginal()
    t = np.array([0.0, 0.5, 1.0, 3.0])
    assert_allclose(arch_mu(g, m, 2, t), np.exp(t) / (2 * np.exp(t) - 1), rtol=1e-7)


def test_arch_mu_independence_is_marginal_hazard():
    m = exponential_marginal(1.7)
    assert_allclose(arch_mu(log_generator(), m, 3, np.array([0.2, 1.0])), 1.7, rtol=1e-7)


@pytest.mark.parametrize("alpha,beta", [(0.5, 1.0), (1.0, 2.0), (2.0, 1.0)])
def test_schur_mu(alpha, beta):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonConvexWarning)
        g = power_ratio_generator(alpha, beta)
    sm = schur_marginal(g)
    for ell in (2, 3):
        for t in (0.25, 1.0, 2.0):
            want = alpha * beta * (ell * t) ** (beta - 1) / ((ell * t) ** beta + 1)
            assert schur_mu(sm, ell, t) == pytest.approx(want, rel=1e-12)
            assert abs(arch_mu(g, sm, ell, t) - want) < 1e-5
            assert schur_min_survival(sm, ell, t) == pytest.approx(float(sm(ell * t)))


def test_arch_diagonals_feed_orderstats():
    diag = arch_diagonals(clayton_generator(2.0), 4)
    os_ = orderstat_from_diagonals(diag, exponential_marginal())
    t = np.linspace(0, 4, 9)
    assert_allclose(os_.matrix(t).mean(axis=0), np.exp(-t), atol=1e-12)
    assert_allclose(min_survival_from_diagonals(diag, exponential_marginal(), 4, t), os_.survival(1, t),
                    atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.3, 4.0), st.integers(2, 6), st.floats(0.01, 0.99))
def test_diagonal_monotone_in_ell(theta, ell, u):
    g = clayton_generator(theta)
    a, b = arch_diagonal(g, ell, u), arch_diagonal(g, ell + 1, u)
    assert 0 <= b <= a <= u + 1e-15


@pytest.mark.parametrize("name,delta,ref", [
    ("independence", lambda u: np.asarray(u) ** 3, lambda u: -np.log(u)),
    ("clayton", lambda u: np.asarray(u) / (3 - 2 * np.asarray(u)), lambda u: 1 / u - 1),
])
def test_recover_generator(name, delta, ref):
    gen = recover_generator(delta, 3)
    assert gen.params["converged"]
    u = np.linspace(0.05, 0.95, 91)
    assert np.max(np.abs(arch_diagonal(gen, 3, u) - delta(u))) < 2e-3
    # identified only up to scale: compare profiles normalised at 1/2
    assert_allclose(gen(u) / gen(0.5), ref(u) / ref(0.5), atol=1e-3)


def test_recover_rejects_wrong_slope():
    with pytest.raises(ContractError):
        recover_generator(lambda u: np.asarray(u) ** 2, 3)


def test_singular_derivative():
    g = GeneratorSpec(lambda u: -np.log(np.asarray(u, dtype=float)), lambda x: np.exp(-np.asarray(x)),
                      lambda u: np.zeros_like(np.asarray(u, dtype=float)), True, "flat")
    with pytest.raises(SingularityError):
        arch_mu(g, exponential_marginal(), 2, 1.0)
