"""Shared fixtures: small surfaces and physical parameters."""

import numpy as np
import pytest

from diracshell.core import Coupling, PhysParams
from diracshell.surface import sphere_grid, spheroid_grid


@pytest.fixture(scope="session")
def params():
    return PhysParams(1.0, 1.0)


@pytest.fixture(scope="session")
def sphere_small():
    return sphere_grid(1.0, 8, 16)


@pytest.fixture(scope="session")
def sphere_medium():
    return sphere_grid(1.0, 12, 24)


@pytest.fixture(scope="session")
def spheroid_small():
    return spheroid_grid(1.0, 1.5, 8, 16)


@pytest.fixture(scope="session")
def coupling_es():
    return Coupling(-3.0, 0.0, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
