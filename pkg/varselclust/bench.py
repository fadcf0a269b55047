"""Benchmark engine: replicate runs of the three clustering methods and their outputs.

Replicate ``r`` (0-based) uses seed ``base_seed + r`` for the simulated
data and for every method run on it. Rows are sorted by
(scenario, method, replicate) so the written files do not depend on the
order in which concurrent replicates finish.
"""

import json
import time
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from .__version__ import version
from .config import EMConfig, SearchConfig, SparseConfig
from .data import DataMatrix, load_csv
from .errors import ConfigInvalid, InvalidWeights, NoRoleData, NoWeightData
from .kmeans import kmeans
from .log import get_logger
from .metrics import adjusted_rand_index, num_selected, vser
from .mixture import CovarianceFamily
from .modsel import Variant, VariableRoles, select_roles
from .simulate import ScenarioSpec, generate
from .sparse import sparse_kmeans_fit, tune_t

logger = get_logger(__name__)

RESULT_COLUMNS = ['scenario', 'method', 'replicate', 'ari', 'vser', 'n_selected',
                  'runtime_seconds', 'seed', 'error']
METRICS = ('ari', 'vser', 'n_selected')
FLOAT_FORMAT = '%.10g'


class Method(str, Enum):
    KMEANS = 'kmeans'
    SPARSE_KMEANS = 'sparse_kmeans'
    RDMCM = 'rdmcm'


@dataclass(frozen=True)
class RunConfig:
    """One benchmark run: a simulated scenario or a CSV file, and the methods to apply.

    ``K`` fixes the number of clusters (required by K-means and sparse
    K-means); ``K_set`` lets the model-selection method choose K and takes
    precedence over ``K`` for it.
    """

    scenario: Optional[ScenarioSpec] = None
    csv_path: Optional[str] = None
    methods: Tuple[str, ...] = tuple(m.value for m in Method)
    replicates: int = 1
    K: Optional[int] = None
    K_set: Optional[Tuple[int, ...]] = None
    base_seed: int = 0
    output_dir: str = 'results'
    families: Tuple[str, ...] = ('spherical_equal',)
    variant: str = Variant.RDMCM.value
    sparse_t: Optional[float] = None
    timing: bool = False
    n_jobs: int = 1
    em: EMConfig = field(default_factory=EMConfig)
    search: SearchConfig = field(default_factory=SearchConfig)
    sparse: SparseConfig = field(default_factory=SparseConfig)

    def __post_init__(self):
        if (self.scenario is None) == (self.csv_path is None):
            raise ConfigInvalid("give exactly one of a scenario or a CSV path")
        if self.replicates < 1:
            raise ConfigInvalid(f"replicates must be >= 1, got {self.replicates}")
        if not self.methods:
            raise ConfigInvalid("at least one method is required")
        try:
            methods = tuple(Method(m).value for m in self.methods)
            families = tuple(CovarianceFamily.parse(f).value for f in self.families)
            Variant(self.variant)
        except ValueError as e:
            raise ConfigInvalid(str(e)) from e
        object.__setattr__(self, 'methods', tuple(dict.fromkeys(methods)))
        object.__setattr__(self, 'families', families)
        if self.K is not None and self.K < 1:
            raise ConfigInvalid(f"K must be positive, got {self.K}")
        if self.K_set is not None:
            if not self.K_set or min(self.K_set) < 1:
                raise ConfigInvalid(f"invalid K_set {self.K_set}")
            object.__setattr__(self, 'K_set', tuple(sorted(set(int(k) for k in self.K_set))))
        fixed = {Method.KMEANS.value, Method.SPARSE_KMEANS.value} & set(self.methods)
        if fixed and self.K is None:
            raise ConfigInvalid(f"{', '.join(sorted(fixed))} need a fixed K")
        if Method.RDMCM.value in self.methods and self.K is None and self.K_set is None:
            raise ConfigInvalid("rdmcm needs K or K_set")
        if self.sparse_t is not None and self.sparse_t < 1:
            raise ConfigInvalid(f"the sparse K-means bound must be >= 1, got {self.sparse_t}")

    @property
    def id(self) -> str:
        return self.scenario.id if self.scenario is not None else Path(self.csv_path).stem

    @property
    def rdmcm_K_set(self) -> Tuple[int, ...]:
        return self.K_set if self.K_set is not None else (self.K,)

    def seeds(self) -> List[int]:
        return [self.base_seed + r for r in range(self.replicates)]

    def as_dict(self) -> dict:
        d = asdict(self)
        if self.scenario is not None:
            d['scenario'] = {**asdict(self.scenario), 'experiment': self.scenario.experiment.value}
        return d


@dataclass(eq=False)
class ResultRow:
    scenario: str
    method: str
    replicate: int
    ari: Optional[float]
    vser: Optional[float]
    n_selected: Optional[int]
    runtime_seconds: Optional[float]
    seed: int
    error: str = ''
    # kept in memory for role, weight and fit displays
    roles: Optional[VariableRoles] = None
    weights: Optional[np.ndarray] = None
    t: Optional[float] = None
    labels: Optional[np.ndarray] = None
    detail: Dict[str, object] = field(default_factory=dict)

    @property
    def failed(self) -> bool:
        return bool(self.error)

    def as_record(self) -> dict:
        return {col: getattr(self, col) for col in RESULT_COLUMNS}


@dataclass(eq=False)
class BenchmarkResult:
    config: RunConfig
    rows: List[ResultRow]
    summary: pd.DataFrame
    p: int

    def frame(self) -> pd.DataFrame:
        return results_frame(self.rows)


def _fit_method(method: Method, data: DataMatrix, config: RunConfig, seed: int) -> dict:
    if method is Method.KMEANS:
        result = kmeans(data.values, config.K, n_init=config.sparse.kmeans_restarts,
                        max_iter=config.sparse.kmeans_max_iter, rng=np.random.default_rng(seed))
        return {'labels': result.labels, 'selected': frozenset(range(data.p)),
                'detail': {'inertia': result.inertia}}

    if method is Method.SPARSE_KMEANS:
        t = config.sparse_t
        if t is None:
            t = tune_t(data, config.K, rng_seed=seed, config=config.sparse).chosen_t
        fit = sparse_kmeans_fit(data, config.K, t, config.sparse, rng_seed=seed)
        return {'labels': fit.labels, 'selected': fit.selected, 'weights': fit.w, 't': fit.t,
                'detail': {'objective': fit.objective, 't': fit.t}}

    model = select_roles(data, config.rdmcm_K_set, config.families, config.em.with_seed(seed),
                         replace(config.search, variant=config.variant))
    return {'labels': model.labels, 'selected': model.roles.S, 'roles': model.roles,
            'detail': {'K': model.mixture.K, 'family': model.mixture.family.code,
                       'criterion': model.criterion, 'steps': len(model.trace) - 1}}


def run_method(method: Union[str, Method], data: DataMatrix, config: RunConfig, replicate: int, seed: int,
               true_labels: Optional[np.ndarray] = None,
               true_relevant: Optional[frozenset] = None) -> ResultRow:
    """Run one method on one dataset; failures are recorded in the row."""
    method = Method(method)
    start = time.perf_counter()
    try:
        out = _fit_method(method, data, config, seed)
    except Exception as e:
        logger.warning(f"{config.id} replicate {replicate}: {method.value} failed: {e}")
        return ResultRow(config.id, method.value, replicate, None, None, None,
                         time.perf_counter() - start if config.timing else None, seed,
                         error=f"{type(e).__name__}: {e}")
    elapsed = time.perf_counter() - start
    selected = out['selected']
    return ResultRow(
        scenario=config.id, method=method.value, replicate=replicate,
        ari=adjusted_rand_index(true_labels, out['labels']) if true_labels is not None else None,
        vser=vser(selected, true_relevant, data.p) if true_relevant is not None else None,
        n_selected=num_selected(selected),
        runtime_seconds=elapsed if config.timing else None,
        seed=seed, roles=out.get('roles'), weights=out.get('weights'), t=out.get('t'),
        labels=out['labels'], detail=out['detail'],
    )


def _replicate(config: RunConfig, replicate: int, seed: int,
               csv_data: Optional[Tuple[DataMatrix, Optional[np.ndarray]]]) -> List[ResultRow]:
    if config.scenario is not None:
        dataset = generate(config.scenario.with_seed(seed))
        data, labels, relevant = dataset.data, dataset.true_labels, dataset.true_relevant
    else:
        data, labels = csv_data
        relevant = None
    return [run_method(m, data, config, replicate, seed, labels, relevant) for m in config.methods]


def results_frame(rows: Sequence[ResultRow]) -> pd.DataFrame:
    frame = pd.DataFrame([row.as_record() for row in rows], columns=RESULT_COLUMNS)
    frame['n_selected'] = frame['n_selected'].astype('Int64')
    return frame


def summarize(rows: Sequence[ResultRow]) -> pd.DataFrame:
    """Mean and sample standard deviation of each metric per (scenario, method)."""
    frame = results_frame(rows)
    records = []
    for (scenario, method), group in frame.groupby(['scenario', 'method'], sort=True):
        for metric in METRICS:
            values = group[metric].dropna().astype(float)
            records.append({
                'scenario': scenario, 'method': method, 'metric': metric,
                'mean': values.mean() if len(values) else np.nan,
                'sd': values.std(ddof=1) if len(values) > 1 else np.nan,
            })
    return pd.DataFrame(records, columns=['scenario', 'method', 'metric', 'mean', 'sd'])


def run_benchmark(config: RunConfig) -> BenchmarkResult:
    csv_data = load_csv(config.csv_path) if config.csv_path is not None else None
    p = config.scenario.p if config.scenario is not None else csv_data[0].p
    jobs = list(enumerate(config.seeds()))
    logger.info(f"{config.id}: {config.replicates} replicate(s) of {', '.join(config.methods)}")
    if config.n_jobs == 1 or len(jobs) == 1:
        batches = [_replicate(config, r, seed, csv_data) for r, seed in jobs]
    else:
        batches = Parallel(n_jobs=config.n_jobs)(
            delayed(_replicate)(config, r, seed, csv_data) for r, seed in jobs)
    rows = sorted((row for batch in batches for row in batch),
                  key=lambda row: (row.scenario, row.method, row.replicate))
    return BenchmarkResult(config=config, rows=rows, summary=summarize(rows), p=p)


def emit_role_frequencies(rows: Sequence[ResultRow], p: int) -> pd.DataFrame:
    """Share of model-selection replicates declaring each variable relevant, redundant or independent."""
    records = []
    by_scenario: Dict[str, List[VariableRoles]] = {}
    for row in rows:
        if row.method == Method.RDMCM.value and row.roles is not None:
            by_scenario.setdefault(row.scenario, []).append(row.roles)
    if not by_scenario:
        raise NoRoleData("no model-selection run recorded variable roles")
    for scenario, roles_list in sorted(by_scenario.items()):
        total = len(roles_list)
        for j in range(p):
            counts = {'relevant': 0, 'redundant': 0, 'independent': 0}
            for roles in roles_list:
                counts[roles.role_of(j)] += 1
            records.append({'scenario': scenario, 'variable': j + 1,
                            **{role: c / total for role, c in counts.items()}})
    return pd.DataFrame(records, columns=['scenario', 'variable', 'relevant', 'redundant', 'independent'])


def _check_weights(row: ResultRow):
    w = row.weights
    if np.any(w < 0):
        raise InvalidWeights(f"{row.scenario} replicate {row.replicate}: negative weight")
    if np.linalg.norm(w) > 1.0 + 1e-9:
        raise InvalidWeights(f"{row.scenario} replicate {row.replicate}: ||w||_2 = {np.linalg.norm(w):.6f} > 1")
    if row.t is not None and w.sum() > row.t + 1e-6:
        raise InvalidWeights(f"{row.scenario} replicate {row.replicate}: ||w||_1 = {w.sum():.6f} > t = {row.t:.6f}")


def emit_weight_summaries(rows: Sequence[ResultRow]) -> pd.DataFrame:
    """Five-number summary of each sparse K-means weight across replicates."""
    by_scenario: Dict[str, List[np.ndarray]] = {}
    for row in rows:
        if row.method == Method.SPARSE_KMEANS.value and row.weights is not None:
            _check_weights(row)
            by_scenario.setdefault(row.scenario, []).append(row.weights)
    if not by_scenario:
        raise NoWeightData("no sparse K-means run recorded a weight vector")
    records = []
    for scenario, weights in sorted(by_scenario.items()):
        W = np.vstack(weights)
        q = np.quantile(W, [0.0, 0.25, 0.5, 0.75, 1.0], axis=0)
        for j in range(W.shape[1]):
            records.append({'scenario': scenario, 'variable': j + 1, 'min': q[0, j], 'q1': q[1, j],
                            'median': q[2, j], 'q3': q[3, j], 'max': q[4, j]})
    return pd.DataFrame(records, columns=['scenario', 'variable', 'min', 'q1', 'median', 'q3', 'max'])


def write_outputs(result: BenchmarkResult, output_dir: Optional[Union[str, Path]] = None) -> Dict[str, Path]:
    """results.csv, summary.csv, roles.csv and weights.csv when available, manifest.json."""
    out = Path(output_dir or result.config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {}

    files['results'] = out / 'results.csv'
    result.frame().to_csv(files['results'], index=False, float_format=FLOAT_FORMAT, na_rep='')
    files['summary'] = out / 'summary.csv'
    result.summary.to_csv(files['summary'], index=False, float_format=FLOAT_FORMAT, na_rep='')

    try:
        files['roles'] = out / 'roles.csv'
        emit_role_frequencies(result.rows, result.p).to_csv(files['roles'], index=False, float_format=FLOAT_FORMAT)
    except NoRoleData:
        del files['roles']
    try:
        files['weights'] = out / 'weights.csv'
        emit_weight_summaries(result.rows).to_csv(files['weights'], index=False, float_format=FLOAT_FORMAT)
    except NoWeightData:
        del files['weights']

    files['manifest'] = out / 'manifest.json'
    manifest = {
        'version': version,
        'config': result.config.as_dict(),
        'seeds': result.config.seeds(),
        'files': sorted(path.name for key, path in files.items() if key != 'manifest'),
        'failures': sum(row.failed for row in result.rows),
    }
    with open(files['manifest'], 'w', encoding='utf-8') as f:
        json.dump(manifest, f, indent=2, sort_keys=True, default=str)
        f.write('\n')
    for path in files.values():
        logger.info(f"wrote {path}")
    return files
