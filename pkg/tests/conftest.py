import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


class FreeModel:
    """Zero potential: free flight, no forces."""

    kind = "free"
    is_gaussian = False
    is_convex = True

    def __init__(self, dim=1):
        self.dim = dim

    def energy(self, x):
        return np.zeros(np.shape(x)[:-1])

    def gradient(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))


class CountingModel:
    """Wraps a model and counts gradient calls (a batched call counts once)."""

    def __init__(self, model):
        self.model = model
        self.calls = 0

    def __getattr__(self, name):
        return getattr(self.model, name)

    def gradient(self, x):
        self.calls += 1
        return self.model.gradient(x)


@pytest.fixture
def free1():
    return FreeModel(1)
