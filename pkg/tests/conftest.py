import numpy as np
import pytest

from asympwave import optical as op
from asympwave import profile as pf
from asympwave import reduced as rd

EPS = 0.02


@pytest.fixture(scope="session")
def semilinear():
    return rd.closed_form_semilinear(rd.gaussian_data(-1.0))


@pytest.fixture(scope="session")
def quasilinear():
    return rd.closed_form_quasilinear_grad(rd.gaussian_data(-1.0))


@pytest.fixture(scope="session")
def euler():
    return rd.closed_form_euler(rd.gaussian_data(1.0), cs1=0.0)


@pytest.fixture(scope="session")
def trivial():
    return rd.closed_form_semilinear(rd.zero_data())


@pytest.fixture(scope="session")
def semi_field(semilinear):
    return pf.ProfileField(semilinear, op.OpticalParams.for_solution(semilinear, EPS))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
