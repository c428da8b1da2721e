import numpy as np
import pytest
from hypothesis import settings

# reproducible property tests
settings.register_profile("ckrr", derandomize=True, deadline=None, max_examples=40)
settings.load_profile("ckrr")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
