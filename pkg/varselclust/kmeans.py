"""K-means on scikit-learn's Lloyd solver with k-means++ seeding.

Used directly as the no-selection baseline and as the inner solver of
sparse K-means (on columns scaled by the square roots of the weights).
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from sklearn.cluster import KMeans

from .log import get_logger

logger = get_logger(__name__)

SEED_BOUND = 2 ** 31 - 1


@dataclass(eq=False)
class KMeansResult:
    labels: np.ndarray
    centers: np.ndarray
    inertia: float
    n_iter: int

    @classmethod
    def from_estimator(cls, km: KMeans) -> "KMeansResult":
        return cls(labels=np.asarray(km.labels_, dtype=int), centers=km.cluster_centers_,
                   inertia=float(km.inertia_), n_iter=int(km.n_iter_))


def centers_from_labels(X: np.ndarray, labels: np.ndarray, K: int) -> np.ndarray:
    """Centroids of a partition; an empty cluster takes the row farthest from its centroid."""
    labels = np.asarray(labels, dtype=int)
    counts = np.bincount(labels, minlength=K)
    centers = np.zeros((K, X.shape[1]))
    np.add.at(centers, labels, X)
    nonempty = counts > 0
    centers[nonempty] /= counts[nonempty, None]
    if nonempty.all():
        return centers
    dist = ((X - centers[labels]) ** 2).sum(axis=1)
    for k in np.flatnonzero(~nonempty):
        far = int(np.argmax(dist))
        logger.debug(f"empty cluster {k} seeded at row {far}")
        centers[k] = X[far]
        dist[far] = -1.0
    return centers


def refit(X: np.ndarray, K: int, labels: np.ndarray, max_iter: int = 100) -> KMeansResult:
    """Lloyd iterations started from the centroids of ``labels``.

    The first assignment step cannot increase the within-cluster sum of
    squares of ``labels``, so the result is never worse than that partition.
    """
    km = KMeans(n_clusters=K, init=centers_from_labels(X, labels, K), n_init=1, max_iter=max_iter)
    return KMeansResult.from_estimator(km.fit(X))


def kmeans(X: np.ndarray, K: int, n_init: int = 10, max_iter: int = 100,
           rng: Optional[np.random.Generator] = None,
           init_labels: Optional[np.ndarray] = None) -> KMeansResult:
    """Best of ``n_init`` k-means++ restarts by within-cluster sum of squares.

    ``init_labels`` is refitted first and kept when no restart beats it.
    """
    X = np.asarray(X, dtype=float)
    if K < 1 or K > X.shape[0]:
        raise ValueError(f"K={K} is incompatible with {X.shape[0]} observations")
    if n_init < 1 and init_labels is None:
        raise ValueError("K-means needs a restart or an initial partition")
    rng = rng if rng is not None else np.random.default_rng(0)

    best = refit(X, K, init_labels, max_iter) if init_labels is not None else None
    if n_init > 0:
        km = KMeans(n_clusters=K, init='k-means++', n_init=n_init, max_iter=max_iter,
                    random_state=int(rng.integers(SEED_BOUND)))
        result = KMeansResult.from_estimator(km.fit(X))
        if best is None or result.inertia < best.inertia:
            best = result
    return best
