import numpy as np
import pytest
from conftest import paired_closed_forms, paired_spec
from numpy.testing import assert_allclose, assert_array_equal

from lifeline.core import ContractError, DomainError
from lifeline.loadsharing import ex_thls_model
from lifeline.mchr import HazardModel
from lifeline.montecarlo import (SampleBatch, default_workers, empirical_stats, format_key, gof_compare,
                                 orderstat_means, parse_key, sample, survivor_set_spread)

T = np.linspace(0, 4, 17)[1:]


def test_keys_roundtrip():
    for text in ["orderstat:2", "marginal", "marginal:3", "min:1,2", "survivor:1,3", "psi:2,1", "ordering:1,3,2"]:
        assert format_key(parse_key(text)) == text
    assert parse_key("min:3,1") == ("min", (0, 2))
    assert parse_key("psi:3,1") == ("psi", (2, 0))
    with pytest.raises(DomainError):
        parse_key("mean:1")


def test_prefix_stability_across_n():
    # row i depends only on the seed and i
    m = paired_spec().hazard_model()
    a = sample(m, 200, 5)
    b = sample(m, 20000, 5)
    assert_array_equal(a.rows, b.rows[:200])


@pytest.mark.parametrize("workers", [2, 3, 8])
def test_worker_determinism(workers):
    m = paired_spec().hazard_model()
    assert_array_equal(sample(m, 30000, 9, workers=1).rows, sample(m, 30000, 9, workers=workers).rows)


def test_env_thread_fallback(monkeypatch):
    monkeypatch.setenv("LIFELINE_THREADS", "4")
    assert default_workers() == 4
    monkeypatch.setenv("LIFELINE_THREADS", "many")
    with pytest.raises(ContractError):
        default_workers()


def test_thls_gof_passes():
    m = paired_spec().hazard_model()
    rep = empirical_stats(sample(m, 40000, 1), T)
    closed = paired_closed_forms(T)
    v = gof_compare(closed, rep)
    assert v.passed, v.worst
    assert "Bonferroni" in v.note


def test_gof_detects_wrong_model():
    m = ex_thls_model([1, 1, 3]).hazard_model()
    rep = empirical_stats(sample(m, 40000, 2), T)
    v = gof_compare({("orderstat", 3): paired_closed_forms(T)[("orderstat", 3)]}, rep)
    assert not v.passed
    assert v.worst["quantity"] == "orderstat:3"


def test_homogeneous_row_path():
    m = HazardModel(3, lambda j, h, t: 1.0 + len(h), time_homogeneous=True, name="iid-load")
    batch = sample(m, 20000, 3)
    assert batch.meta["path"] == "homogeneous"
    ex = ex_thls_model([3, 4, 3])
    rep = empirical_stats(batch, T)
    v = gof_compare({("orderstat", k): ex.orderstat_survival(k, T) for k in (1, 2, 3)}, rep)
    assert v.passed, v.worst


def test_thinning_path():
    # i.i.d. units with periodic hazard 1 + sin(t) / 2, bounded by 3/2 each
    m = HazardModel(2, lambda j, h, t: 1 + 0.5 * np.sin(t), rate_bound=lambda h: 1.5 * (2 - len(h)),
                    name="periodic")
    batch = sample(m, 20000, 4)
    assert batch.meta["path"] == "thinning"
    t = np.array([0.25, 0.5, 1.0, 2.0])
    rep = empirical_stats(batch, t)
    v = gof_compare({"marginal": np.exp(-(t + 0.5 * (1 - np.cos(t))))}, rep)
    assert v.passed, v.worst
    assert_array_equal(sample(m, 300, 4, workers=3).rows, batch.rows[:300])


def test_time_varying_without_bound_rejected():
    m = HazardModel(2, lambda j, h, t: 2 * t)
    with pytest.raises(ContractError):
        sample(m, 10, 0)


def test_csv_roundtrip(tmp_path):
    batch = sample(paired_spec().hazard_model(), 100, 0)
    path = tmp_path / "b.csv"
    batch.to_csv(path)
    again = SampleBatch.from_csv(path)
    assert_array_equal(again.rows, batch.rows)
    assert path.read_text().splitlines()[0] == "T1,T2,T3"


def test_survivor_counts_sum_to_n():
    batch = sample(paired_spec().hazard_model(), 5000, 6)
    rep = empirical_stats(batch, T)
    total = sum(rep.survivor_counts().values())
    assert_array_equal(total, np.full(T.shape, 5000))
    assert survivor_set_spread(rep, 1) < 5


def test_orderstat_means():
    batch = sample(paired_spec().hazard_model(), 20000, 8)
    mean, se = orderstat_means(batch)
    # E T_{1:3} = 1, E T_{2:3} = 2, E T_{3:3} = 2 + 1/2
    assert np.all(np.abs(mean - [1.0, 2.0, 2.5]) < 4 * se)


def test_gof_contract_errors():
    rep = empirical_stats(sample(paired_spec().hazard_model(), 50, 0), T)
    with pytest.raises(ContractError):
        gof_compare({}, rep)
    with pytest.raises(ContractError):
        gof_compare({"marginal": np.ones(3)}, rep)
    with pytest.raises(ContractError):
        gof_compare({"marginal": np.ones(T.size)}, rep, t_grid=T + 1)
    with pytest.raises(DomainError):
        sample(paired_spec().hazard_model(), 0, 0)
