import math
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

from tubekernel import Polynomial, gap_intervals  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=60, derandomize=True)
settings.load_profile("default")

SQRT2 = math.sqrt(2.0)


@pytest.fixture(scope="session")
def double_well():
    return Polynomial((0.0, 0.0, -1.0, 0.0, 0.25))


@pytest.fixture(scope="session")
def double_well_env(double_well):
    return gap_intervals(double_well)


@pytest.fixture(scope="session")
def quartic():
    return Polynomial((0.0, 0.0, 0.0, 0.0, 0.25))


@pytest.fixture(scope="session")
def quartic_env(quartic):
    return gap_intervals(quartic)


def random_domain_poly(rng: np.random.Generator, n: int, spread: float = 3.0) -> Polynomial:
    """Random b of degree 2n with leading coefficient 1/(2n) and moderate lower terms."""
    c = np.zeros(2 * n + 1)
    c[2:2 * n] = rng.uniform(-spread, spread, 2 * n - 2)
    c[2 * n] = 1.0 / (2 * n)
    return Polynomial(c)
