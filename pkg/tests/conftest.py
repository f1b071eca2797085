import numpy as np
import pytest

from lifeline.loadsharing import OdThlsSpec


def paired_spec(gamma=0.75):
    """Three units, equal initial rates 1/3, pair rates gamma / 1 - gamma, third stage 2."""
    nxt = {0: {2: gamma, 1: 1 - gamma}, 1: {0: gamma, 2: 1 - gamma}, 2: {1: gamma, 0: 1 - gamma}}

    def fn(p, j):
        if len(p) == 0:
            return 1 / 3
        if len(p) == 1:
            return nxt[p[0]][j]
        return 2.0

    return OdThlsSpec.from_function(3, fn)


def paired_closed_forms(t, gamma=0.75):
    e1, e2 = np.exp(-t), np.exp(-2 * t)
    return {
        ("orderstat", 1): e1,
        ("orderstat", 2): (1 + t) * e1,
        ("orderstat", 3): 2 * t * e1 + e2,
        ("marginal", None): (2 / 3) * e1 + t * e1 + e2 / 3,
        ("min", (0, 1)): e1 * (1 + t / 3),
        ("psi", (0,)): t * e1 / 3,
        ("psi", (0, 2)): gamma / 3 * (t * e1 - e1 + e2),
        ("psi", (0, 1)): (1 - gamma) / 3 * (t * e1 - e1 + e2),
    }


@pytest.fixture
def paired():
    return paired_spec()


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: s.split("criterion ", 1)[1]):
            terminalreporter.write_line(line)
