import numpy as np
import pytest

from sgnms.core import DiffOperator, Params
from sgnms.scenarios import certification_grid, solitary_wave
from sgnms.structure import lift

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def params():
    return Params(g=1.0)


@pytest.fixture(scope="session")
def wave02(params):
    """Certified solitary wave, a = 0.2 on h0 = 1."""
    return solitary_wave(1.0, 0.2, params)


@pytest.fixture(scope="session")
def wave02_setup(params, wave02):
    """(scenario, grid, op, lifted state) on the wide certification grid."""
    grid = certification_grid(wave02, 512)
    op = DiffOperator(grid, "fourier")
    zs = lift(wave02.build(grid), op)
    return wave02, grid, op, zs


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
