import numpy as np
import pytest

from watertight.shapes import flat_patch, paraboloid_patch, plane_patch


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


@pytest.fixture
def paraboloid():
    return paraboloid_patch()


@pytest.fixture
def level_plane():
    """Plane z = 0.04; cuts the paraboloid in the radius-0.2 circle."""
    return plane_patch(0.0, 0.0, 0.04)


@pytest.fixture
def flat():
    return flat_patch()
