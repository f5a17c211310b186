import numpy as np
import pytest

from contention_lqg.plants import PlantParams
from contention_lqg.riccati import solve_gains


@pytest.fixture(scope="session")
def scalar_params():
    return PlantParams(A=0.9, B=1.0, C=1.5, W=1.0, V=1.5, Q=1.0, R=0.1)


@pytest.fixture(scope="session")
def scalar_gains(scalar_params):
    return solve_gains(scalar_params)


@pytest.fixture(scope="session")
def two_state_params():
    return PlantParams(
        A=np.array([[1.01, 0.10], [0.0, 0.97]]),
        B=np.array([[0.0], [1.0]]),
        C=np.array([[1.0, 0.0]]),
        W=0.1 * np.eye(2),
        V=np.array([[0.2]]),
        Q=np.eye(2),
        R=np.array([[0.1]]),
    )


@pytest.fixture(scope="session")
def two_state_gains(two_state_params):
    return solve_gains(two_state_params)
