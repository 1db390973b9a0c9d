import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gcs_tsp.geometry import Polytope
from gcs_tsp.instance import SplitMix64, random_polytope

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def unit_box():
    return Polytope.box([0.0, 0.0], [1.0, 1.0])


def triangle():
    # x >= 0, y >= 0, x + y <= 1
    return Polytope([[-1.0, 0.0], [0.0, -1.0], [1.0, 1.0]], [0.0, 0.0, 1.0])


def random_pair(seed: int, d: int = 2, spread: float = 1.6):
    """Two generator-style polytopes whose centers differ by up to ``spread``."""
    rng = SplitMix64(seed)
    c1 = np.zeros(d)
    c2 = np.array([spread * (2 * rng.uniform() - 1) for _ in range(d)])
    return random_polytope(rng, c1), random_polytope(rng, c2)


@pytest.fixture
def box():
    return unit_box()


@pytest.fixture
def tri():
    return triangle()
