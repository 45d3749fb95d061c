import math

import numpy as np
import pytest
from hypothesis import settings

from gsquant.grid import make_grid, sample
from gsquant.quantize import symbol_grid

settings.register_profile("gsq", deadline=None, max_examples=30, derandomize=True)
settings.load_profile("gsq")


def self_dual(n: int) -> float:
    """Half-width for which a grid and its dual coincide."""
    return math.sqrt(math.pi * n / 2)


@pytest.fixture(scope="session")
def base32():
    return make_grid(1, 32, self_dual(32))


@pytest.fixture(scope="session")
def base64():
    return make_grid(1, 64, self_dual(64))


@pytest.fixture(scope="session")
def base128():
    return make_grid(1, 128, self_dual(128))


@pytest.fixture(scope="session")
def sym32(base32):
    return symbol_grid(base32)


@pytest.fixture(scope="session")
def sym64(base64):
    return symbol_grid(base64)


@pytest.fixture(scope="session")
def gauss_sym32(sym32):
    return sample(sym32, lambda x, xi: np.exp(-(x ** 2 + xi ** 2) / 2), "gauss2d")


@pytest.fixture(scope="session")
def line256():
    return make_grid(1, 256, 12.0)
