import numpy as np
import pytest

from itmbench.image_io import LinearImage


@pytest.fixture
def rng():
    return np.random.default_rng(20250808)


@pytest.fixture
def random_pair(rng):
    """Two independent random 32x32 linear images in (0, 1]."""
    a = rng.uniform(0.01, 1.0, size=(32, 32, 3)).astype(np.float32)
    b = rng.uniform(0.01, 1.0, size=(32, 32, 3)).astype(np.float32)
    return LinearImage(a), LinearImage(b)


def make_image(rng, h=16, w=16, lo=0.0, hi=1.0):
    return LinearImage(rng.uniform(lo, hi, size=(h, w, 3)).astype(np.float32))
