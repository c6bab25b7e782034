import numpy as np
import pytest

from icaoct import make_grid


@pytest.fixture(scope="session")
def grid():
    """Full-scale default grid: 1024 samples, 840 nm centre, 160 nm span."""
    return make_grid()


@pytest.fixture(scope="session")
def desk_grid():
    """Desk-scale grid used by the regressor tests."""
    return make_grid(128, 840e-9, 160e-9)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
