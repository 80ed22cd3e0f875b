import os
import sys

import numpy as np
import pytest

# The services are imported the way the backend imports them: with backend/ on the path
BACKEND_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "backend")
if BACKEND_DIR not in sys.path:
    sys.path.insert(0, BACKEND_DIR)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def bump_density():
    """30 x^2 (1 - x)^2 on [0, 1], a smooth probability density."""
    from services.measures import GridDensity1D

    return GridDensity1D.from_function(lambda x: 30.0 * x ** 2 * (1.0 - x) ** 2, 0.0, 1.0, 200)
