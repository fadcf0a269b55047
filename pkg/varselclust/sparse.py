"""Sparse K-means with permutation tuning of the L1 bound.

The fit maximises ``sum_j w_j a_j(labels)`` over partitions and weights
with ``w >= 0``, ``||w||_2 <= 1`` and ``||w||_1 <= t``, where ``a_j`` is the
between-cluster sum of squares of variable j. It alternates a weighted
K-means step with the closed-form weight update (soft-thresholding at the
smallest threshold meeting the L1 bound, then normalising).
"""

import math
from dataclasses import dataclass, field
from typing import FrozenSet, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from .config import SparseConfig
from .data import DataMatrix
from .errors import AllNonpositive, EmptyCluster
from .kmeans import kmeans
from .log import get_logger

logger = get_logger(__name__)


@dataclass(eq=False)
class SparseFit:
    labels: np.ndarray
    w: np.ndarray
    t: float
    objective: float
    n_iter: int
    objective_trace: List[float] = field(default_factory=list)
    converged: bool = False

    @property
    def selected(self) -> FrozenSet[int]:
        return frozenset(int(j) for j in np.flatnonzero(self.w > 0))


@dataclass(eq=False)
class GapCurve:
    t_grid: List[float]
    gap: List[float]
    se: List[float]
    chosen_t: float
    objectives: List[float] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            't': self.t_grid,
            'gap': self.gap,
            'se': self.se,
            'objective': self.objectives,
            'chosen': [t == self.chosen_t for t in self.t_grid],
        })


def _values(data: Union[DataMatrix, np.ndarray]) -> np.ndarray:
    return data.values if isinstance(data, DataMatrix) else DataMatrix(data).values


def bcss_per_variable(data: Union[DataMatrix, np.ndarray], labels: Sequence[int],
                      n_clusters: Optional[int] = None) -> np.ndarray:
    """Between-cluster sum of squares of each column.

    Centroid form ``2 [sum_i (y_ij - ybar_j)^2 - sum_k sum_{i in k} (y_ij - ybar_kj)^2]``,
    equal to the pairwise-difference form of the sparse K-means objective.
    With ``n_clusters`` the ids must be 0..n_clusters-1 and all present.
    """
    X = _values(data)
    labels = np.asarray(labels)
    if labels.shape[0] != X.shape[0]:
        raise ValueError(f"{labels.shape[0]} labels for {X.shape[0]} observations")
    if n_clusters is not None:
        counts = np.bincount(labels.astype(int), minlength=n_clusters)
        if counts.shape[0] > n_clusters or np.any(counts[:n_clusters] == 0):
            raise EmptyCluster(f"cluster sizes {counts.tolist()} for K={n_clusters}")
    _, codes = np.unique(labels, return_inverse=True)
    codes = codes.ravel()
    counts = np.bincount(codes)
    sums = np.zeros((counts.shape[0], X.shape[1]))
    np.add.at(sums, codes, X)
    centroids = sums / counts[:, None]
    total = ((X - X.mean(axis=0)) ** 2).sum(axis=0)
    within = ((X - centroids[codes]) ** 2).sum(axis=0)
    return 2.0 * (total - within)


def _l1_of_normalised(a: np.ndarray, delta: float) -> float:
    s = np.maximum(a - delta, 0.0)
    norm = np.linalg.norm(s)
    return s.sum() / norm if norm > 0 else 0.0


def find_threshold(a: Sequence[float], t: float) -> float:
    """Smallest soft-threshold making the normalised weights meet ``||w||_1 <= t``.

    Bisection keeps ``hi`` feasible and runs until the bracket is at machine
    precision, well inside 1e-8 on ``||w||_1 - t``.
    """
    a = np.maximum(np.asarray(a, dtype=float), 0.0)
    if _l1_of_normalised(a, 0.0) <= t:
        return 0.0
    lo, hi = 0.0, float(a.max())
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _l1_of_normalised(a, mid) > t:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * a.max():
            break
    return hi


def update_weights(a: Sequence[float], t: float) -> np.ndarray:
    """Weights maximising ``w . a`` under ``w >= 0, ||w||_2 <= 1, ||w||_1 <= t``."""
    if t < 1:
        raise ValueError(f"the L1 bound t must be >= 1, got {t}")
    a = np.asarray(a, dtype=float)
    if not np.any(a > 0):
        raise AllNonpositive("every between-cluster sum of squares is <= 0")
    a = np.maximum(a, 0.0)
    delta = find_threshold(a, t)
    s = np.maximum(a - delta, 0.0)
    norm = np.linalg.norm(s)
    if norm == 0:
        # tied maxima: the bound cannot be met by thresholding alone
        s = (a == a.max()).astype(float)
        norm = np.linalg.norm(s)
    w = s / norm
    l1 = w.sum()
    if l1 > t + 1e-8:
        logger.warning(f"tied weights exceed the L1 bound ({l1:.4f} > {t:.4f}); rescaling")
        w *= t / l1
    return w


def _fit_one(X: np.ndarray, K: int, t: float, config: SparseConfig,
             rng: np.random.Generator) -> SparseFit:
    p = X.shape[1]
    w = np.full(p, 1.0 / math.sqrt(p))
    labels = None
    trace = []
    converged = False
    n_iter = 0
    for n_iter in range(1, config.max_iter + 1):
        active = w > 0
        result = kmeans(X[:, active] * np.sqrt(w[active]), K, n_init=config.kmeans_restarts,
                        max_iter=config.kmeans_max_iter, rng=rng, init_labels=labels)
        labels = result.labels
        a = bcss_per_variable(X, labels, K)
        new_w = update_weights(a, t)
        trace.append(float(new_w @ a))
        change = np.abs(new_w - w).sum() / np.abs(w).sum()
        w = new_w
        if change < config.tol:
            converged = True
            break
    return SparseFit(labels=labels, w=w, t=float(t), objective=trace[-1], n_iter=n_iter,
                     objective_trace=trace, converged=converged)


def sparse_kmeans_fit(data: Union[DataMatrix, np.ndarray], K: int, t: float,
                      config: SparseConfig = SparseConfig(), rng_seed: int = 0) -> SparseFit:
    """Best of ``config.n_starts`` alternations by objective."""
    X = _values(data)
    n, p = X.shape
    if K < 2:
        raise ValueError(f"sparse K-means needs K >= 2, got {K}")
    if n <= K:
        raise ValueError(f"n={n} observations cannot support K={K} clusters")
    if not 1.0 <= t <= math.sqrt(p) + 1e-12:
        raise ValueError(f"t={t} outside [1, sqrt(p)={math.sqrt(p):.4f}]")
    best = None
    for seed in np.random.SeedSequence(rng_seed).spawn(config.n_starts):
        fit = _fit_one(X, K, t, config, np.random.default_rng(seed))
        if best is None or fit.objective > best.objective:
            best = fit
    logger.debug(f"sparse K-means t={t:.3f}: objective={best.objective:.4f}, "
                 f"{len(best.selected)} variables weighted")
    return best


def default_t_grid(p: int, n_t: int = 10, t_min: float = 1.1) -> List[float]:
    """Log-spaced bounds from ``t_min`` to sqrt(p)."""
    upper = math.sqrt(p)
    if upper <= t_min:
        return [max(1.0, upper)]
    return [float(t) for t in np.geomspace(t_min, upper, n_t)]


def _cell_seed(rng_seed: int, i: int, b: int) -> int:
    return int(np.random.SeedSequence([int(rng_seed) & 0xFFFFFFFF, i, b]).generate_state(1)[0])


def tune_t(data: Union[DataMatrix, np.ndarray], K: int, t_grid: Optional[Sequence[float]] = None,
           n_perm: Optional[int] = None, rng_seed: int = 0, config: SparseConfig = SparseConfig(),
           n_jobs: int = 1) -> GapCurve:
    """Gap statistic of the sparse K-means objective against column permutations."""
    data = data if isinstance(data, DataMatrix) else DataMatrix(data)
    n_perm = config.n_perm if n_perm is None else n_perm
    if t_grid is None:
        t_grid = default_t_grid(data.p, config.n_t, config.t_min)
    grid = sorted(float(t) for t in t_grid)
    if not grid:
        raise ValueError("t_grid must be non-empty")
    if n_perm < 2:
        raise ValueError(f"n_perm must be >= 2, got {n_perm}")
    upper = math.sqrt(data.p)
    if grid[0] < 1 or grid[-1] > upper + 1e-12:
        raise ValueError(f"t_grid must lie in [1, {upper:.4f}]")

    perm_rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(rng_seed).spawn(n_perm)]
    datasets = [data.values] + [data.permute_columns(rng).values for rng in perm_rngs]

    def cell(i, b):
        return sparse_kmeans_fit(datasets[b], K, grid[i], config, _cell_seed(rng_seed, i, b)).objective

    cells = [(i, b) for i in range(len(grid)) for b in range(n_perm + 1)]
    if n_jobs == 1:
        objectives = [cell(i, b) for i, b in cells]
    else:
        objectives = Parallel(n_jobs=n_jobs)(delayed(cell)(i, b) for i, b in cells)
    table = np.log(np.maximum(np.array(objectives).reshape(len(grid), n_perm + 1), 1e-300))

    gap = table[:, 0] - table[:, 1:].mean(axis=1)
    se = table[:, 1:].std(axis=1, ddof=1) * math.sqrt(1.0 + 1.0 / n_perm)
    chosen = grid[int(np.argmax(gap))]
    for t, g, s in zip(grid, gap, se):
        logger.debug(f"gap(t={t:.3f}) = {g:.4f} (se {s:.4f})")
    return GapCurve(t_grid=grid, gap=[float(g) for g in gap], se=[float(s) for s in se],
                    chosen_t=chosen, objectives=[float(o) for o in np.exp(table[:, 0])])
