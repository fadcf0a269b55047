import math

import numpy as np
import pytest

from varselclust.config import SparseConfig
from varselclust.errors import AllNonpositive, EmptyCluster
from varselclust.simulate import ScenarioSpec, generate
from varselclust.sparse import (bcss_per_variable, default_t_grid, find_threshold, sparse_kmeans_fit,
                                tune_t, update_weights)

FAST = SparseConfig(max_iter=10, kmeans_restarts=3, n_perm=3, n_t=3)


def test_bcss_example():
    X = np.array([[0.0], [0.0], [2.0], [2.0]])
    assert bcss_per_variable(X, [0, 0, 1, 1])[0] == pytest.approx(8.0)
    np.testing.assert_allclose(bcss_per_variable(np.random.default_rng(0).random((6, 3)), [0] * 6), 0.0,
                               atol=1e-12)


def test_bcss_matches_pairwise_form():
    gen = np.random.default_rng(101)
    for _ in range(50):
        n, p, K = int(gen.integers(5, 25)), int(gen.integers(1, 5)), int(gen.integers(2, 4))
        X = gen.standard_normal((n, p))
        labels = np.concatenate([np.arange(K), gen.integers(K, size=n - K)])
        d = (X[:, None, :] - X[None, :, :]) ** 2
        expected = d.sum(axis=(0, 1)) / n
        for k in range(K):
            idx = labels == k
            expected -= d[np.ix_(idx, idx)].sum(axis=(0, 1)) / idx.sum()
        np.testing.assert_allclose(bcss_per_variable(X, labels, K), expected, rtol=1e-9, atol=1e-9)


def test_bcss_scales_with_the_square_of_the_data(rng):
    X = rng.standard_normal((20, 3))
    labels = np.arange(20) % 2
    np.testing.assert_allclose(bcss_per_variable(3.0 * X, labels), 9.0 * bcss_per_variable(X, labels))


def test_bcss_true_labels_beat_random_labels():
    gen = np.random.default_rng(404)
    wins = 0
    for _ in range(20):
        labels = gen.integers(3, size=90)
        centers = np.array([[0.0, 0.0], [4.0, 0.0], [0.0, 4.0]])
        X = np.column_stack([centers[labels] + gen.standard_normal((90, 2)), gen.standard_normal((90, 2))])
        truth = bcss_per_variable(X, labels, 3)
        shuffled = bcss_per_variable(X, gen.permutation(labels), 3)
        wins += bool(np.all(truth[:2] >= shuffled[:2]))
    assert wins >= 19


def test_bcss_rejects_empty_clusters():
    with pytest.raises(EmptyCluster):
        bcss_per_variable(np.zeros((4, 1)), [0, 0, 2, 2], 3)


def test_update_weights_examples():
    np.testing.assert_allclose(update_weights([3.0, 4.0], math.sqrt(2.0)), [0.6, 0.8])
    np.testing.assert_allclose(update_weights([3.0, 4.0], 1.0), [0.0, 1.0], atol=1e-12)
    assert find_threshold([3.0, 4.0], math.sqrt(2.0)) == 0.0


def _oracle_weights(a, t):
    """Closed-form weights: the threshold solves a quadratic on the right active set."""
    order = np.sort(a)[::-1]
    if a.sum() / np.linalg.norm(a) <= t:
        return a / np.linalg.norm(a)
    for m in range(1, len(a) + 1):
        top = order[:m]
        lower = order[m] if m < len(a) else 0.0
        s1, s2 = top.sum(), (top ** 2).sum()
        coeffs = [m * (m - t * t), -2.0 * s1 * (m - t * t), s1 * s1 - t * t * s2]
        for delta in np.roots(coeffs):
            if abs(delta.imag) > 1e-9:
                continue
            delta = delta.real
            if lower - 1e-9 <= delta < top[-1]:
                s = np.maximum(a - delta, 0.0)
                if abs(s.sum() / np.linalg.norm(s) - t) < 1e-7:
                    return s / np.linalg.norm(s)
    raise AssertionError("no active set found")


def test_update_weights_matches_closed_form():
    gen = np.random.default_rng(202)
    for _ in range(100):
        p = int(gen.integers(2, 20))
        a = gen.exponential(size=p)
        t = float(gen.uniform(1.0, math.sqrt(p)))
        w = update_weights(a, t)
        np.testing.assert_allclose(w, _oracle_weights(a, t), atol=1e-6)
        assert np.all(w >= 0)
        assert np.linalg.norm(w) <= 1 + 1e-9
        assert w.sum() <= t + 1e-8


def test_update_weights_with_tied_maxima_stays_feasible():
    w = update_weights([2.0, 2.0, 1.0], 1.0)
    assert w[2] == 0
    assert w[0] == pytest.approx(w[1])
    assert w.sum() <= 1.0 + 1e-8
    assert np.linalg.norm(w) <= 1.0 + 1e-12


def test_update_weights_errors():
    with pytest.raises(AllNonpositive):
        update_weights([0.0, -1.0], 1.0)
    with pytest.raises(ValueError):
        update_weights([1.0, 2.0], 0.5)


def test_sparse_fit_is_feasible_and_monotone():
    gen = np.random.default_rng(303)
    for i in range(50):
        n, p, K = int(gen.integers(30, 61)), int(gen.integers(3, 9)), int(gen.integers(2, 4))
        centers = 3.0 * gen.standard_normal((K, p))
        X = centers[gen.integers(K, size=n)] + gen.standard_normal((n, p))
        t = float(gen.uniform(1.0, math.sqrt(p)))
        fit = sparse_kmeans_fit(X, K, t, FAST, rng_seed=i)
        assert np.all(fit.w >= 0)
        assert np.linalg.norm(fit.w) <= 1 + 1e-9
        assert fit.w.sum() <= t + 1e-8
        trace = np.asarray(fit.objective_trace)
        assert np.all(np.diff(trace) >= -1e-9 * np.abs(trace[:-1])), (i, trace)
        assert fit.selected == frozenset(np.flatnonzero(fit.w > 0).tolist())


def test_largest_bound_weights_every_variable(rng):
    X = rng.standard_normal((40, 4)) + np.repeat([[0, 0, 0, 0], [4, 4, 0, 0]], 20, axis=0)
    fit = sparse_kmeans_fit(X, 2, 2.0, FAST)
    assert np.all(fit.w > 0)
    assert len(fit.selected) == 4


def test_sparse_fit_argument_checks(rng):
    X = rng.standard_normal((10, 4))
    with pytest.raises(ValueError):
        sparse_kmeans_fit(X, 1, 1.5)
    with pytest.raises(ValueError):
        sparse_kmeans_fit(X, 2, 2.5)
    with pytest.raises(ValueError):
        sparse_kmeans_fit(X[:2], 2, 1.5)


def test_sparse_fit_finds_the_informative_variables():
    ds = generate(ScenarioSpec.default('exp1', 4, seed=1))
    fit = sparse_kmeans_fit(ds.data, 3, 2.5)
    assert set(np.argsort(fit.w)[-5:].tolist()) == set(range(5))


def test_default_t_grid():
    grid = default_t_grid(25, 10, 1.1)
    assert len(grid) == 10
    assert grid[0] == pytest.approx(1.1) and grid[-1] == pytest.approx(5.0)
    assert default_t_grid(1) == [1.0]


def test_tune_t_shapes_and_choice(rng):
    X = rng.standard_normal((30, 4)) + np.repeat([[0, 0, 0, 0], [3, 0, 0, 0]], 15, axis=0)
    curve = tune_t(X, 2, t_grid=[1.5], n_perm=3, config=FAST)
    assert curve.chosen_t == 1.5
    assert len(curve.gap) == len(curve.se) == 1

    curve = tune_t(X, 2, n_perm=3, config=FAST)
    assert len(curve.t_grid) == len(curve.gap) == len(curve.se) == FAST.n_t
    assert curve.chosen_t == curve.t_grid[int(np.argmax(curve.gap))]
    assert list(curve.to_frame().columns) == ['t', 'gap', 'se', 'objective', 'chosen']


def test_tune_t_errors(rng):
    X = rng.standard_normal((20, 4))
    with pytest.raises(ValueError):
        tune_t(X, 2, t_grid=[1.5], n_perm=1)
    with pytest.raises(ValueError):
        tune_t(X, 2, t_grid=[0.5, 1.5], n_perm=3)
    with pytest.raises(ValueError):
        tune_t(X, 2, t_grid=[3.0], n_perm=3)


def test_tune_t_parallel_matches_serial(rng):
    X = rng.standard_normal((30, 4)) + np.repeat([[0, 0, 0, 0], [3, 0, 0, 0]], 15, axis=0)
    serial = tune_t(X, 2, t_grid=[1.2, 1.8], n_perm=3, rng_seed=4, config=FAST)
    parallel = tune_t(X, 2, t_grid=[1.2, 1.8], n_perm=3, rng_seed=4, config=FAST, n_jobs=2)
    assert parallel.gap == serial.gap
    assert parallel.chosen_t == serial.chosen_t


def test_tune_t_on_pure_noise_finds_no_signal():
    gen = np.random.default_rng(505)
    config = SparseConfig(max_iter=10, kmeans_restarts=3, n_perm=5, n_t=3)
    quiet, top = 0, set()
    for run in range(10):
        X = gen.standard_normal((100, 5))
        curve = tune_t(X, 2, rng_seed=run, config=config)
        quiet += all(abs(g) < 3 * s for g, s in zip(curve.gap, curve.se))
        fit = sparse_kmeans_fit(X, 2, curve.chosen_t, config, rng_seed=run)
        top.add(int(np.argmax(fit.w)))
    assert quiet >= 8
    # exchangeable columns: no variable is favoured across runs
    assert len(top) >= 2
