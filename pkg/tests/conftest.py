import numpy as np
import pytest

from disfom import SyntheticQpSpec, generate_instance


@pytest.fixture(scope="session")
def small_instance():
    """Shared d=120 synthetic instance; generation is deterministic."""
    return generate_instance(SyntheticQpSpec(d=120, seed=20240601))


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
