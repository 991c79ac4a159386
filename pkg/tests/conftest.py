import numpy as np
import pytest

from risnoma.geometry import NetworkScenario
from risnoma.mfris import CircuitPowerModel, HarvestModel


def tiny_scenario(n_surfaces=2, n_antennas=2, m_h=2, m_v=1) -> NetworkScenario:
    """Small fast scenario for unit tests: K=2 directions, J=2 users."""
    return NetworkScenario(
        bs_position=np.array([0.0, 0.0, 5.0]),
        user_centers=np.array(
            [
                [[2.0, 20.0, 0.0], [2.0, 25.0, 0.0]],
                [[8.0, 22.0, 0.0], [8.0, 27.0, 0.0]],
            ]
        ),
        user_drop_radius=1.0,
        n_antennas=n_antennas,
        n_surfaces=n_surfaces,
        m_h=m_h,
        m_v=m_v,
        h0=1e-2,
        k0=2.2,
        beta0=10 ** 0.3,
        sigma_s2=1e-10,
        sigma_u2=1e-10,
        w_min=np.array([5.0, 4.0, 2.0]),
        w_max=np.array([5.0, 30.0, 2.0]),
    )


@pytest.fixture
def scenario():
    return tiny_scenario()


@pytest.fixture
def harvest():
    return HarvestModel()


@pytest.fixture
def circuit():
    return CircuitPowerModel()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
