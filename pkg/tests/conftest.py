import numpy as np
import pytest

from irregwave.design import power_density, uniform_density
from irregwave.wavelet import make_basis


@pytest.fixture(scope="session")
def haar():
    return make_basis(1)


@pytest.fixture(scope="session")
def db3():
    return make_basis(3)


@pytest.fixture(scope="session")
def db2():
    return make_basis(2)


@pytest.fixture(scope="session")
def linear_zero():
    """g(x) = 4|x - 0.5|."""
    return power_density(0.5, 1.0)


@pytest.fixture(scope="session")
def flat():
    return uniform_density(0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
