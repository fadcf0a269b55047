"""Seeded generators for the simulated benchmark settings.

Experiment 1 hides three spherical clusters in the first five of 25 or 100
variables. Experiment 2 clusters the first two variables and makes the
next ones redundant through a linear regression on them. The waveform data
is the classical three-class convex combination of triangular waves.
"""

import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy.linalg import block_diag

from .data import DataMatrix, save_csv
from .errors import ConfigInvalid
from .log import get_logger
from .modsel import VariableRoles

logger = get_logger(__name__)


class Experiment(str, Enum):
    EXP1 = 'exp1'
    EXP2 = 'exp2'
    WAVEFORM = 'waveform'

    @property
    def index(self) -> int:
        return list(Experiment).index(self) + 1

    @property
    def scenarios(self) -> tuple:
        return {'exp1': (1, 2, 3, 4, 5), 'exp2': (1, 2, 3), 'waveform': (1,)}[self.value]


_DEFAULT_N = {
    Experiment.EXP1: {1: 30, 2: 30, 3: 300, 4: 300, 5: 300},
    Experiment.EXP2: {1: 2000, 2: 2000, 3: 2000},
    Experiment.WAVEFORM: {1: 5000},
}
_P = {
    Experiment.EXP1: {1: 25, 2: 25, 3: 25, 4: 25, 5: 100},
    Experiment.EXP2: {1: 14, 2: 14, 3: 101},
    Experiment.WAVEFORM: {1: 40},
}


@dataclass(frozen=True)
class ScenarioSpec:
    experiment: Experiment
    scenario: int
    n: int
    p: int
    mu: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'experiment', Experiment(self.experiment))
        if self.scenario not in self.experiment.scenarios:
            raise ConfigInvalid(f"{self.experiment.value} has no scenario {self.scenario}")
        expected = _P[self.experiment][self.scenario]
        if self.p != expected:
            raise ConfigInvalid(f"{self.id} has p={expected}, got {self.p}")
        if self.n < 1:
            raise ConfigInvalid(f"n must be positive, got {self.n}")
        if self.seed < 0:
            raise ConfigInvalid(f"seed must be non-negative, got {self.seed}")

    @classmethod
    def default(cls, experiment: Union[str, Experiment], scenario: int = 1, seed: int = 0,
                n: Optional[int] = None) -> "ScenarioSpec":
        """Reference sample sizes, dimensions and Experiment 1 separations."""
        experiment = Experiment(experiment)
        if scenario not in experiment.scenarios:
            raise ConfigInvalid(f"{experiment.value} has no scenario {scenario}")
        mu = 0.0
        if experiment is Experiment.EXP1:
            mu = 0.6 if scenario in (1, 3) else 1.7
        return cls(experiment=experiment, scenario=scenario,
                   n=_DEFAULT_N[experiment][scenario] if n is None else n,
                   p=_P[experiment][scenario], mu=mu, seed=seed)

    @property
    def id(self) -> str:
        if self.experiment is Experiment.WAVEFORM:
            return 'waveform'
        return f"{self.experiment.value}-s{self.scenario}"

    def with_seed(self, seed: int) -> "ScenarioSpec":
        return ScenarioSpec(self.experiment, self.scenario, self.n, self.p, self.mu, seed)

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence([self.seed, self.experiment.index, self.scenario]))


@dataclass(eq=False)
class LabeledDataset:
    data: DataMatrix
    true_labels: np.ndarray
    true_relevant: frozenset
    true_roles: Optional[VariableRoles] = None


def _check(spec: ScenarioSpec, experiment: Experiment):
    if spec.experiment is not experiment:
        raise ConfigInvalid(f"{spec.id} is not an {experiment.value} scenario")


def gen_exp1(spec: ScenarioSpec) -> LabeledDataset:
    _check(spec, Experiment.EXP1)
    rng = spec.rng()
    labels = rng.integers(3, size=spec.n)
    centers = np.array([[spec.mu] * 5, [-spec.mu] * 5, [0.0] * 5])
    relevant = centers[labels] + rng.standard_normal((spec.n, 5))
    noise = rng.standard_normal((spec.n, spec.p - 5))
    roles = VariableRoles(S=range(5), W=range(5, spec.p))
    return LabeledDataset(DataMatrix(np.hstack([relevant, noise])), labels, frozenset(range(5)), roles)


def rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


EXP2_MEANS = np.array([[0.0, 0.0], [4.0, 0.0], [0.0, 2.0], [4.0, 2.0]])
EXP2_COEF = np.array([[0.5, 2.0, 0.0, -1.0, 2.0, 0.5, 4.0, 3.0, 2.0],
                      [1.0, 0.0, 3.0, 2.0, -4.0, 0.0, 0.5, 0.0, 1.0]])
EXP2_INTERCEPT = np.concatenate([[0.0, 0.0], np.linspace(0.4, 2.0, 7)])


def exp2_omega() -> np.ndarray:
    """Block-diagonal residual covariance of the nine redundant columns."""
    omega1 = rotation(math.pi / 3).T @ np.diag([1.0, 3.0]) @ rotation(math.pi / 3)
    omega2 = rotation(math.pi / 6).T @ np.diag([2.0, 6.0]) @ rotation(math.pi / 6)
    return block_diag(np.eye(3), 0.5 * np.eye(2), omega1, omega2)


def gen_exp2(spec: ScenarioSpec) -> LabeledDataset:
    _check(spec, Experiment.EXP2)
    rng = spec.rng()
    n = spec.n
    proportions = [0.2, 0.3, 0.3, 0.2] if spec.scenario == 1 else [0.25] * 4
    labels = rng.choice(4, size=n, p=proportions)
    y12 = EXP2_MEANS[labels] + rng.standard_normal((n, 2))

    if spec.scenario == 1:
        y3 = 3.0 * y12[:, :1] + math.sqrt(0.5) * rng.standard_normal((n, 1))
        rest = np.linspace(0.0, 4.0, 11) + rng.standard_normal((n, 11))
        values = np.hstack([y12, y3, rest])
        roles = VariableRoles(S={0, 1}, U={2}, R={0}, W=range(3, 14))
    else:
        eps = rng.multivariate_normal(np.zeros(9), exp2_omega(), size=n, method='cholesky')
        redundant = EXP2_INTERCEPT + y12 @ EXP2_COEF + eps
        if spec.scenario == 2:
            means = np.array([3.2, 3.6, 4.0])
        else:
            means = np.repeat([0.0, 2.0, 4.0], 30)
        rest = means + rng.standard_normal((n, means.shape[0]))
        values = np.hstack([y12, redundant, rest])
        roles = VariableRoles(S={0, 1}, U=range(2, 11), R={0, 1}, W=range(11, spec.p))
    return LabeledDataset(DataMatrix(values), labels, frozenset({0, 1}), roles)


def waveform_bases() -> np.ndarray:
    """3 x 21 triangular waves h1, h2, h3 sampled at 1..21."""
    j = np.arange(1, 22)
    h1 = np.maximum(6 - np.abs(j - 11), 0)
    h2 = np.maximum(6 - np.abs(j - 4 - 11), 0)
    h3 = np.maximum(6 - np.abs(j + 4 - 11), 0)
    return np.vstack([h1, h2, h3]).astype(float)


WAVEFORM_PAIRS = ((0, 1), (0, 2), (1, 2))


def gen_waveform(n: int = 5000, seed: int = 0) -> LabeledDataset:
    spec = ScenarioSpec.default(Experiment.WAVEFORM, 1, seed=seed, n=n)
    rng = spec.rng()
    h = waveform_bases()
    labels = rng.integers(3, size=n)
    u = rng.uniform(size=(n, 1))
    pairs = np.array(WAVEFORM_PAIRS)[labels]
    signal = u * h[pairs[:, 0]] + (1.0 - u) * h[pairs[:, 1]]
    values = np.hstack([signal + rng.standard_normal((n, 21)), rng.standard_normal((n, 19))])
    roles = VariableRoles(S=range(21), W=range(21, 40))
    return LabeledDataset(DataMatrix(values), labels, frozenset(range(21)), roles)


def generate(spec: ScenarioSpec) -> LabeledDataset:
    if spec.experiment is Experiment.EXP1:
        dataset = gen_exp1(spec)
    elif spec.experiment is Experiment.EXP2:
        dataset = gen_exp2(spec)
    else:
        dataset = gen_waveform(spec.n, spec.seed)
    logger.debug(f"generated {spec.id} n={spec.n} p={spec.p} seed={spec.seed}")
    return dataset


def export_csv(dataset: LabeledDataset, path: Union[str, Path], include_labels: bool = True) -> Path:
    """Header ``V1..Vp``, one observation per row, optional ``label`` column."""
    return save_csv(dataset.data, path, dataset.true_labels if include_labels else None)
