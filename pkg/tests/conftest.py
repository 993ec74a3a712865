import numpy as np
import pytest

from semiwave import potentials as pots
from semiwave.classical import initial_state, integrate_flow


@pytest.fixture(scope="session")
def harmonic_traj():
    return integrate_flow(pots.harmonic(), initial_state(1.0, 0.0),
                          2 * np.pi, tol=1e-11)


@pytest.fixture(scope="session")
def quartic_traj():
    return integrate_flow(pots.quartic_well(), initial_state(1.0, 0.0),
                          1.0, tol=1e-11)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
