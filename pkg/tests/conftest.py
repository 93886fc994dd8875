import numpy as np
import pytest

from resonant_potential import embedded_eigenvalue_potential, free_potential, wigner_von_neumann

NU = 1.5
TAU = 1.0


@pytest.fixture(scope="session")
def free_V():
    return free_potential(NU, TAU)


@pytest.fixture(scope="session")
def embedded_V():
    # lambda0 = 2, R ~ r^(-3/2)
    return embedded_eigenvalue_potential(NU, TAU, k_bar0=1.0, c=6.0, r_max=400.0)


@pytest.fixture(scope="session")
def wvn_V():
    return wigner_von_neumann(c=1.0, k_bar0=1.0, tau=TAU, nu=NU)


@pytest.fixture
def log_envelope():
    return lambda r: 1.0 + np.log1p(np.asarray(r, dtype=float))


@pytest.fixture
def small_config():
    return {
        "n": 3,
        "K0": -1.0,
        "b": 10.0,
        "delta": 0.1,
        "r_max": 200.0,
        "schedule": {"k_bar_min": 1.0, "k_bar_max": 2.0, "max_level": 1, "growth": 2.0, "width": 0.5,
                     "mode": "locked"},
    }
