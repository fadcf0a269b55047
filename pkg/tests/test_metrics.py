from itertools import combinations

import numpy as np
import pytest

from varselclust.errors import LengthMismatch
from varselclust.metrics import adjusted_rand_index, contingency_table, num_selected, vser


def _pair_counting_ari(p1, p2):
    a = b = c = d = 0
    for i, j in combinations(range(len(p1)), 2):
        same1, same2 = p1[i] == p1[j], p2[i] == p2[j]
        if same1 and same2:
            a += 1
        elif same1:
            b += 1
        elif same2:
            c += 1
        else:
            d += 1
    return 100.0 * 2 * (a * d - b * c) / ((a + b) * (b + d) + (a + c) * (c + d))


def test_identical_and_trivial_partitions():
    assert adjusted_rand_index([0, 0, 1, 1, 2], [5, 5, 7, 7, 1]) == 100.0
    assert adjusted_rand_index([0, 0, 0], [1, 1, 1]) == 100.0
    assert adjusted_rand_index([0, 0, 0, 0], [0, 1, 0, 1]) == 0.0
    assert adjusted_rand_index([3], [4]) == 100.0


def test_ari_matches_pair_counting():
    gen = np.random.default_rng(404)
    for _ in range(100):
        n = int(gen.integers(10, 31))
        p1 = gen.integers(int(gen.integers(2, 5)), size=n)
        p2 = gen.integers(int(gen.integers(2, 5)), size=n)
        if len(set(p1)) == 1 and len(set(p2)) == 1:
            continue
        assert adjusted_rand_index(p1, p2) == pytest.approx(_pair_counting_ari(p1, p2), abs=1e-9)


def test_ari_symmetry_and_relabeling():
    gen = np.random.default_rng(5)
    for _ in range(20):
        p1, p2 = gen.integers(3, size=40), gen.integers(4, size=40)
        assert adjusted_rand_index(p1, p2) == adjusted_rand_index(p2, p1)
        relabeled = np.array([7, 3, 11, 0])[p2]
        assert adjusted_rand_index(p1, relabeled) == pytest.approx(adjusted_rand_index(p1, p2), abs=1e-12)


def test_ari_errors():
    with pytest.raises(LengthMismatch):
        adjusted_rand_index([0, 1], [0, 1, 1])
    with pytest.raises(ValueError):
        adjusted_rand_index([], [])


def test_vser_examples():
    assert vser(range(5), range(5), 25) == 0.0
    assert vser(range(25), range(5), 25) == 80.0
    assert vser(range(100), range(5), 100) == 95.0
    assert vser([], range(5), 25) == 20.0
    with pytest.raises(ValueError):
        vser([0], [0], 0)


def test_vser_triangle_inequality():
    gen = np.random.default_rng(6)
    for _ in range(50):
        a, b, c = (set(np.flatnonzero(gen.random(12) < 0.5).tolist()) for _ in range(3))
        assert vser(a, c, 12) <= vser(a, b, 12) + vser(b, c, 12) + 1e-12


def test_num_selected_and_contingency():
    assert num_selected(frozenset({0, 3, 4})) == 3
    np.testing.assert_array_equal(contingency_table([0, 0, 1], [1, 1, 0]), [[0, 2], [1, 0]])
