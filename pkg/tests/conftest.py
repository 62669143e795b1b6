import math

import pytest

from selab.mesh import build_mesh

PI2 = math.pi**2


@pytest.fixture(scope="session")
def unit_mesh():
    return build_mesh("interval", 1001)


@pytest.fixture(scope="session")
def coarse_mesh():
    return build_mesh("interval", 401)
