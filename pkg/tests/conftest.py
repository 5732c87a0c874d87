import sys

import numpy as np
import pytest

from derham_trace.mesh import gen_structured_cube
from derham_trace.projections import BoundaryProjector, CommutingProjection
from derham_trace.splits import worsey_farin_split
from derham_trace.surface import BoundaryComplex
from derham_trace.weights import WeightSet


@pytest.fixture(scope="session")
def cube1():
    return gen_structured_cube(1)


@pytest.fixture(scope="session")
def cube2():
    return gen_structured_cube(2)


@pytest.fixture(scope="session")
def bc2(cube2):
    return BoundaryComplex(cube2, worsey_farin_split(cube2))


@pytest.fixture(scope="session")
def ws2(cube2):
    return WeightSet(cube2)


@pytest.fixture(scope="session")
def bp2(cube2, ws2):
    return BoundaryProjector(cube2, ws2)


@pytest.fixture(scope="session")
def pi2(cube2, bp2):
    return CommutingProjection(cube2, boundary=bp2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mods = [m for name, m in sys.modules.items() if name.endswith("test_acceptance")]
    lines = [l for m in mods for l in getattr(m, "VERDICTS", [])]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
