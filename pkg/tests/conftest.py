import numpy as np
import pytest

from cachebc import SystemConfig


@pytest.fixture
def cfg_2rx():
    """Two receivers, library of 10, the running weak/strong channel pair."""
    return SystemConfig(
        K=2, D=10, F=1, deltas=[0.8, 0.2], rates=[0.4] * 10, memories=[1.0, 1.0]
    )


@pytest.fixture
def cfg_3rx():
    return SystemConfig(
        K=3,
        D=3,
        F=1,
        deltas=[0.8, 0.5, 0.2],
        rates=[0.4] * 3,
        memories=[0.3, 0.3, 0.0],
    )


def rng(seed=0):
    return np.random.default_rng(seed)
