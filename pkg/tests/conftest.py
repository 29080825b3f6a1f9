import numpy as np
import pytest
from hypothesis import HealthCheck, settings

# jit compilation makes first examples slow; keep hypothesis deterministic and patient
settings.register_profile(
    "eymah",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("eymah")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
