import logging

import numpy as np
import pytest

from impzone.admissible import SpectrahedronSet
from impzone.config import example_config
from impzone.geometry import Polytope
from impzone.lti import ImpulsiveSystem, discretize
from impzone.pipeline import compute_sets

logging.getLogger("impzone").setLevel(logging.ERROR)
logging.getLogger("impzone.lti").setLevel(logging.ERROR)

A_EX = np.array([[-1.0, 1.2], [0.0, 0.2]])
B_EX = np.array([3.0, -2.0])
X_EX = Polytope.box([0.5, 0.0], [4.5, 4.0])
U_EX = Polytope.box([-0.2], [0.2])
T_EX = Polytope.box([2.5, 1.5], [4.0, 3.5])


@pytest.fixture(scope="session")
def system():
    return ImpulsiveSystem(A_EX, B_EX, 1.0, X_EX, U_EX)


@pytest.fixture(scope="session")
def md(system):
    return system.modal


@pytest.fixture(scope="session")
def disc(system):
    return discretize(system)


@pytest.fixture(scope="session")
def state_spec(md):
    return SpectrahedronSet(md, X_EX, 1.0)


@pytest.fixture(scope="session")
def target_spec(md):
    return SpectrahedronSet(md, T_EX, 1.0)


@pytest.fixture(scope="session")
def config():
    return example_config()


@pytest.fixture(scope="session")
def sets(config):
    return compute_sets(config)


@pytest.fixture(scope="session")
def repo_root(request):
    return request.config.rootpath
