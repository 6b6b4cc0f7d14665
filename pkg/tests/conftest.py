import os

import numpy as np
import pytest

from angiosim import SimConfig


def pytest_configure(config):
    # Single-process by default so test timings and bytes are reproducible;
    # the parallel-equivalence test overrides this locally.
    os.environ.setdefault("ANGIOSIM_THREADS", "1")


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def small_config():
    """Cheap render config for tests that loop over many images."""
    return SimConfig(t0=33.0, image_size=(64, 64), total_length=160.0)
