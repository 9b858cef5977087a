import pytest

from blochkit.geometry import AsymptoticParams
from blochkit.lattice import dual, square_lattice
from blochkit.potential import FourierPotential


@pytest.fixture(scope="session")
def Z2():
    return dual(square_lattice(2))


@pytest.fixture(scope="session")
def two_mode(Z2):
    q, _ = FourierPotential.hermitian(Z2, {(1, 0): 0.05, (1, 1): 0.05})
    return q


@pytest.fixture(scope="session")
def zero_q(Z2):
    return FourierPotential.zero(Z2)


@pytest.fixture(scope="session")
def desk15():
    """rho = 15 with desk-scale radii."""
    return AsymptoticParams(rho=15.0, series_radius=1.5, direction_radius=1.5,
                            block_a_radius=2.0)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
