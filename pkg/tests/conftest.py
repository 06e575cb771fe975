import numpy as np
import pytest

from etseed import backend


@pytest.fixture(params=backend.available_backends())
def kernel_backend(request):
    """Run a test once per available kernel backend."""
    previous = backend.active_name()
    backend.select(request.param)
    yield request.param
    backend.select(previous)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
