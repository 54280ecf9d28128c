import numpy as np
import pytest

from kgdamp.grid import build_grid
from kgdamp.nonlinearity import pure_power
from kgdamp.stationary import find_stationary

ACCEPTANCE_LINES = []


def record_acceptance(number, ok, detail):
    ACCEPTANCE_LINES.append((number, "PASS" if ok else "FAIL", detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number, status, detail in sorted(ACCEPTANCE_LINES, key=lambda x: (x[0], x[2])):
        terminalreporter.write_line(f"criterion {number:>2}: {status}  {detail}")


def sech(x):
    return 1.0 / np.cosh(x)


@pytest.fixture(scope="session")
def cubic():
    return pure_power(3.0, gamma=1.0)


@pytest.fixture(scope="session")
def soliton(cubic):
    """d=1 cubic ground state on the default grid."""
    return find_stationary(cubic, 1, 0, R=30.0, N=1024)


@pytest.fixture(scope="session")
def soliton_small(cubic):
    """Coarser d=1 ground state for time-stepping tests."""
    return find_stationary(cubic, 1, 0, grid=build_grid(1, 20.0, 256))


@pytest.fixture(scope="session")
def ground3(cubic):
    return find_stationary(cubic, 3, 0, R=20.0, N=1024)
