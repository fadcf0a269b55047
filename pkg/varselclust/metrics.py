"""Clustering agreement and variable-selection scores, in percent."""

from typing import AbstractSet, Iterable, Sequence

import numpy as np
from sklearn.metrics.cluster import contingency_matrix

from .errors import LengthMismatch


def _as_partition(labels: Sequence[int]) -> np.ndarray:
    labels = np.asarray(labels).ravel()
    if labels.size == 0:
        raise ValueError("a partition needs at least one observation")
    return labels


def contingency_table(p1: Sequence[int], p2: Sequence[int]) -> np.ndarray:
    """Counts n_ij of observations in cluster i of ``p1`` and cluster j of ``p2``."""
    a, b = _as_partition(p1), _as_partition(p2)
    if a.shape[0] != b.shape[0]:
        raise LengthMismatch(f"partitions of length {a.shape[0]} and {b.shape[0]}")
    return np.asarray(contingency_matrix(a, b), dtype=np.int64)


def _pairs(x) -> float:
    x = np.asarray(x, dtype=float)
    return float((x * (x - 1) / 2.0).sum())


def adjusted_rand_index(p1: Sequence[int], p2: Sequence[int]) -> float:
    """Hubert-Arabie adjusted Rand index, x 100.

    When the expected index equals its maximum (both partitions trivial)
    the score is 100 for identical partitions and 0 otherwise.
    """
    table = contingency_table(p1, p2)
    n = int(table.sum())
    index = _pairs(table)
    rows = _pairs(table.sum(axis=1))
    cols = _pairs(table.sum(axis=0))
    total = n * (n - 1) / 2.0
    expected = rows * cols / total if total > 0 else 0.0
    maximum = (rows + cols) / 2.0
    if maximum == expected:
        identical = table.shape[0] == table.shape[1] and np.count_nonzero(table) == table.shape[0]
        return 100.0 if identical else 0.0
    return 100.0 * (index - expected) / (maximum - expected)


def vser(selected: Iterable[int], truth: Iterable[int], p: int) -> float:
    """Variable selection error rate: ``|selected ^ truth| / p``, x 100."""
    if p < 1:
        raise ValueError(f"p must be positive, got {p}")
    return 100.0 * len(set(selected) ^ set(truth)) / p


def num_selected(selected: AbstractSet[int]) -> int:
    return len(set(selected))
