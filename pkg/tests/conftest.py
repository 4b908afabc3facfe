import numpy as np
import pytest


def random_complex(rng, rows, cols):
    return (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
