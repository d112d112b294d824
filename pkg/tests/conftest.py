import numpy as np
import pytest

from laxtop import apelrot


@pytest.fixture
def rng():
    return np.random.default_rng(20261014)


@pytest.fixture
def ref_params():
    return apelrot.reference_params()


@pytest.fixture
def ref_state(ref_params):
    return apelrot.reference_state(ref_params)


def random_skew(rng, n, scale=1.0):
    A = rng.normal(scale=scale, size=(n, n))
    return A - A.T


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
