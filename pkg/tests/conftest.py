import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from face6dof.face_model import canonical_mesh

settings.register_profile("default", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def mesh():
    return canonical_mesh()


def rot_angle(a, b):
    """Angle in radians between two rotation matrices."""
    c = (np.trace(a @ b.T) - 1.0) / 2.0
    return float(np.arccos(np.clip(c, -1.0, 1.0)))
