import math

import numpy as np
import pytest

from stochwave import BoundaryCondition, build_basis, default_grid

PI = math.pi


@pytest.fixture(scope="session")
def dirichlet_basis():
    return build_basis(PI, PI, BoundaryCondition.DIRICHLET, 8.0)


@pytest.fixture(scope="session")
def dirichlet_grid(dirichlet_basis):
    return default_grid(dirichlet_basis)


@pytest.fixture(scope="session")
def neumann_basis():
    return build_basis(PI, PI, BoundaryCondition.NEUMANN, 8.0)


@pytest.fixture(scope="session")
def neumann_grid(neumann_basis):
    return default_grid(neumann_basis)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
