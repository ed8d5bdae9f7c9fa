import numpy as np
import pytest

from robinns.grid import build_grid

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def box8():
    return build_grid(1.0, 8)


@pytest.fixture(scope="session")
def mixed8():
    # walls on x and z, periodic y, anisotropic spacing
    return build_grid((1.0, 2.0, 0.7), (8, 6, 5), ("wall", "periodic", "wall"))


@pytest.fixture(scope="session")
def tg_slab():
    return build_grid((np.pi, np.pi, 1.0), (32, 32, 1), ("wall", "wall", "periodic"))
