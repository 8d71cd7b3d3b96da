import numpy as np
import pytest

from engellab import models


@pytest.fixture(scope="session")
def sol():
    return models.builtin("sol")


@pytest.fixture(scope="session")
def prolongation():
    return models.builtin("prolongation")


@pytest.fixture(scope="session")
def sl2():
    return models.builtin("sl2-suspension")


@pytest.fixture(scope="session")
def sol_chart(sol):
    return sol.chart_twin


@pytest.fixture(scope="session")
def sl2_chart(sl2):
    return sl2.chart_twin


@pytest.fixture()
def rng():
    return np.random.default_rng(0)


@pytest.fixture(scope="session")
def abelian():
    constants = np.zeros((4, 4, 4))
    m = models.LieAlgebraModel(constants, names=["X", "Y", "Z", "W"])
    m.declare("W", ["X", "Y", "W"], ["X", "Y"])
    return m
