import numpy as np
import pytest


def random_spd(rng, n, spread=1.0):
    """Random SPD matrix with log-spectrum spread controlled by ``spread``."""
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    w = np.exp(spread * rng.uniform(-1.0, 1.0, n))
    return (q * w) @ q.T


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
