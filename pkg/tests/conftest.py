import numpy as np
import pytest


def random_spd(rng: np.random.Generator, dim: int, jitter: float = 0.3) -> np.ndarray:
    a = rng.standard_normal((dim, dim))
    return a @ a.T / dim + jitter * np.eye(dim)


def random_joint_blocks(rng: np.random.Generator, dim: int):
    """Random valid (mean0, mean1, cov00, cov11, cov01) blocks."""
    full = random_spd(rng, 2 * dim)
    mean = rng.standard_normal(2 * dim)
    return (mean[:dim], mean[dim:], full[:dim, :dim],
            full[dim:, dim:], full[:dim, dim:])


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
