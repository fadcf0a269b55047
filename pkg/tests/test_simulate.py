import math

import numpy as np
import pytest

from varselclust.data import load_csv
from varselclust.errors import ConfigInvalid
from varselclust.simulate import (EXP2_COEF, EXP2_INTERCEPT, Experiment, ScenarioSpec, export_csv, exp2_omega,
                                  gen_exp2, gen_waveform, generate, rotation)


def test_defaults():
    spec = ScenarioSpec.default('exp1', 5)
    assert (spec.n, spec.p, spec.mu, spec.id) == (300, 100, 1.7, 'exp1-s5')
    assert ScenarioSpec.default('exp1', 1).mu == 0.6
    assert ScenarioSpec.default('exp2', 3).p == 101
    assert ScenarioSpec.default('waveform').id == 'waveform'
    assert Experiment.EXP2.scenarios == (1, 2, 3)


@pytest.mark.parametrize('experiment, scenario', [('exp1', 2), ('exp2', 2), ('waveform', 1)])
def test_same_seed_same_data(experiment, scenario):
    spec = ScenarioSpec.default(experiment, scenario, seed=7, n=200)
    a, b = generate(spec), generate(spec)
    np.testing.assert_array_equal(a.data.values, b.data.values)
    np.testing.assert_array_equal(a.true_labels, b.true_labels)
    c = generate(spec.with_seed(8))
    assert not np.array_equal(a.data.values, c.data.values)
    assert a.data.p == spec.p and a.data.n == 200
    assert a.true_roles.covers(spec.p)


def test_exp1_distribution():
    ds = generate(ScenarioSpec.default('exp1', 4, seed=2, n=100_000))
    X, labels = ds.data.values, ds.true_labels
    for k, center in enumerate([1.7, -1.7, 0.0]):
        np.testing.assert_allclose(X[labels == k, :5].mean(axis=0), center, atol=0.025)
    np.testing.assert_allclose(X[:, 5:].mean(axis=0), 0.0, atol=0.02)
    np.testing.assert_allclose(X[:, 5:].var(axis=0), 1.0, atol=0.03)
    assert ds.true_relevant == frozenset(range(5))


def test_exp2_residual_covariances():
    omega1 = rotation(math.pi / 3).T @ np.diag([1.0, 3.0]) @ rotation(math.pi / 3)
    np.testing.assert_allclose(np.linalg.eigvalsh(omega1), [1.0, 3.0])
    omega = exp2_omega()
    assert omega.shape == (9, 9)
    np.testing.assert_allclose(omega[7:, 7:], [[3.0, math.sqrt(3.0)], [math.sqrt(3.0), 5.0]])
    np.testing.assert_allclose(omega[3:5, 3:5], 0.5 * np.eye(2))


def test_exp2_scenario1_proportions_and_roles():
    ds = gen_exp2(ScenarioSpec.default('exp2', 1, seed=3, n=20_000))
    shares = np.bincount(ds.true_labels, minlength=4) / 20_000
    np.testing.assert_allclose(shares, [0.2, 0.3, 0.3, 0.2], atol=0.035)
    roles = ds.true_roles
    assert roles.S == {0, 1} and roles.U == {2} and roles.R == {0}
    assert roles.W == set(range(3, 14))


def test_exp2_scenario2_regression_structure():
    ds = gen_exp2(ScenarioSpec.default('exp2', 2, seed=4, n=20_000))
    X = ds.data.values
    eps = X[:, 2:11] - EXP2_INTERCEPT - X[:, :2] @ EXP2_COEF
    np.testing.assert_allclose(np.cov(eps[:, 7:], rowvar=False), exp2_omega()[7:, 7:], atol=0.3)
    corr = np.corrcoef(X, rowvar=False)
    assert corr[3, 0] > 0.3 and corr[4, 1] > 0.3
    assert abs(corr[11, 0]) < 0.1
    np.testing.assert_allclose(X[:, 11:].mean(axis=0), [3.2, 3.6, 4.0], atol=0.05)


def test_exp2_scenario2_correlation_pattern():
    ds = gen_exp2(ScenarioSpec.default('exp2', 2, seed=6, n=2000))
    corr = np.corrcoef(ds.data.values, rowvar=False)
    for i, j in [(3, 0), (4, 1)]:
        assert abs(corr[i, j]) > 0.3
    for i in range(11, 14):
        others = [j for j in range(14) if j != i]
        assert np.all(np.abs(corr[i, others]) < 0.1), (i, corr[i, others])


def test_exp2_scenario3_independent_blocks():
    ds = gen_exp2(ScenarioSpec.default('exp2', 3, seed=5))
    means = ds.data.values[:, 11:].mean(axis=0)
    for block, mean in enumerate([0.0, 2.0, 4.0]):
        assert means[30 * block:30 * (block + 1)].mean() == pytest.approx(mean, abs=0.1)
    assert ds.true_roles.W == set(range(11, 101))


def test_waveform_structure():
    ds = gen_waveform(n=20_000, seed=0)
    X, labels = ds.data.values, ds.true_labels
    assert X.shape == (20_000, 40)
    assert X[labels == 0, 10].mean() == pytest.approx(4.0, abs=0.1)
    np.testing.assert_allclose(X[:, 21:].var(axis=0), 1.0, atol=0.03)
    assert ds.true_relevant == frozenset(range(21))


def test_export_csv_round_trip(tmp_path):
    ds = generate(ScenarioSpec.default('exp1', 1, seed=1))
    path = export_csv(ds, tmp_path / 'exp1.csv')
    data, labels = load_csv(path)
    assert data.names[:2] == ['V1', 'V2']
    np.testing.assert_allclose(data.values, ds.data.values, rtol=1e-9)
    np.testing.assert_array_equal(labels, ds.true_labels)

    data, labels = load_csv(export_csv(ds, tmp_path / 'plain.csv', include_labels=False))
    assert labels is None and data.p == 25


def test_invalid_scenarios():
    with pytest.raises(ConfigInvalid):
        ScenarioSpec.default('exp1', 6)
    with pytest.raises(ConfigInvalid):
        ScenarioSpec('exp1', 1, n=30, p=30)
    with pytest.raises(ConfigInvalid):
        ScenarioSpec('exp1', 1, n=0, p=25)
    with pytest.raises(ConfigInvalid):
        ScenarioSpec('exp2', 1, n=10, p=14, seed=-1)
    with pytest.raises(ConfigInvalid):
        gen_exp2(ScenarioSpec.default('exp1', 1))
