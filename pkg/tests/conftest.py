import numpy as np
import pytest

from fsiplate.coupled import CoupledProblem
from fsiplate.mesh import build_box_fluid_mesh, extract_plate_mesh

UNIT_BOX = ((0.0, 1.0), (0.0, 1.0), (-1.0, 0.0))


@pytest.fixture(scope="session")
def box2():
    return build_box_fluid_mesh(2, 2, 2, UNIT_BOX)


@pytest.fixture(scope="session")
def box4():
    return build_box_fluid_mesh(4, 4, 4, UNIT_BOX)


@pytest.fixture(scope="session")
def plate4(box4):
    return extract_plate_mesh(box4)


@pytest.fixture(scope="session")
def problem2():
    return CoupledProblem(2)


@pytest.fixture(scope="session")
def problem4():
    return CoupledProblem(4)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance criteria register one summary line each; printed at the end of the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
