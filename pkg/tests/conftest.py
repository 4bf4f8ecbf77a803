import sys

import numpy as np
import pytest

from latharm.model import Constant, HoppingFamily, ModelSpec, Polynomial, PotentialSpec, builtin_model


@pytest.fixture(scope="session")
def m1():
    return builtin_model("M1")


@pytest.fixture(scope="session")
def m2():
    return builtin_model("M2")


@pytest.fixture(scope="session")
def m3():
    return builtin_model("M3")


def nearest_neighbour_1d(diag=2.0, off=-1.0, a1=None):
    a0 = {(0,): Constant(diag), (1,): Constant(off), (-1,): Constant(off)}
    return HoppingFamily(1, a0, a1 or {})


def harmonic_1d(a1=None, V1=0.0, coef=1.0, label="toy"):
    """V0 = coef·x² with a single well at 0 and nearest-neighbour hopping."""
    pot = PotentialSpec(
        Polynomial([(coef, (2,))]), Constant(V1), np.array([[0.0]]), confinement=(1.0, 0.5 * coef)
    )
    return ModelSpec(nearest_neighbour_1d(a1=a1), pot, label)


@pytest.fixture
def offset_model():
    """Nonzero first-order data: a1 on the diagonal 0.5 and V1 = 0.25, so c = 0.75."""
    return harmonic_1d(a1={(0,): Constant(0.5)}, V1=0.25, label="offset")


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "ACCEPTANCE_LINES", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
