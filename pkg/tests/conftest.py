import math

import pytest

from ghost_interference.analytic import conditional_packets, post_slit_state
from ghost_interference.oracle import GridSpec
from ghost_interference.schema import Geometry, SourceParams


# Physical fixture: 702 nm, z0 = 100 um, L1 = L2 = 0.5 m (D = 1.5 m).
@pytest.fixture
def physical_source():
    return SourceParams(sigma=1e6, omega=1e-2)

@pytest.fixture
def physical_geom():
    return Geometry(z0=1e-4, epsilon=1e-5, lam=702e-9, L1=0.5, L2=0.5)

@pytest.fixture
def physical_state(physical_source, physical_geom):
    return post_slit_state(physical_source, physical_geom, conditional_packets(physical_source, physical_geom))

# Wider slits keep the analytic visibility inside the bound at the second fringe.
@pytest.fixture
def duality_geom():
    return Geometry(z0=1e-4, epsilon=3e-5, lam=702e-9, L1=0.5, L2=0.5)

# Desk-scale fixture for the grid oracle: lambda*L/pi = 5 on both legs.
@pytest.fixture(scope="module")
def desk_source():
    return SourceParams(sigma=2.0, omega=10.0)

@pytest.fixture(scope="module")
def desk_geom():
    return Geometry(z0=6.0, epsilon=1.0, lam=1.0, L1=5 * math.pi, L2=5 * math.pi)

@pytest.fixture(scope="module")
def desk_grid():
    return GridSpec.square(1024, 64.0)
