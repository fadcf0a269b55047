import numpy as np
import pytest

from varselclust.config import EMConfig


def blobs(rng, centers, n_per, scale=1.0):
    """Gaussian blobs around ``centers`` with ``n_per`` points each, and their labels."""
    centers = np.asarray(centers, dtype=float)
    scale = np.asarray(scale, dtype=float)
    X = np.vstack([c + scale * rng.standard_normal((n_per, centers.shape[1])) for c in centers])
    labels = np.repeat(np.arange(len(centers)), n_per)
    return X, labels


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def fast_em():
    return EMConfig(n_starts=3, max_iter=300)


@pytest.fixture
def role_data(rng):
    """Two clusters on columns 0-1, column 2 = 2 * column 0 + noise, columns 3-5 wide pure noise."""
    n = 300
    labels = rng.integers(2, size=n)
    y12 = np.column_stack([5.0 * labels, 5.0 * labels]) + rng.standard_normal((n, 2))
    y3 = 2.0 * y12[:, :1] + rng.standard_normal((n, 1))
    noise = 3.0 * rng.standard_normal((n, 3))
    return np.hstack([y12, y3, noise]), labels
