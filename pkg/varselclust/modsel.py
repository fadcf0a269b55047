"""Variable selection for model-based clustering by model selection.

Each variable plays one of three roles:

    S  relevant, modelled by the Gaussian mixture;
    U  redundant, linear regression on predictors R (a subset of S);
    W  independent Gaussian, unrelated to S.

A roles partition is scored by the sum of the BICs of the three blocks.
The search starts from S = all variables and applies the single best
removal or re-inclusion move while the criterion strictly increases.
"""

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed
from scipy import linalg

from .config import EMConfig, SearchConfig
from .data import DataMatrix
from .errors import (DegenerateFit, RankDeficient, SearchFailed, SingularData,
                     SingularOmega, ZeroVariance)
from .log import get_logger
from .mixture import CovarianceFamily, MixtureFit, best_mixture, em_fit

logger = get_logger(__name__)

LOG_2PI = math.log(2.0 * math.pi)
VARIANCE_FLOOR = 1e-8

Indices = FrozenSet[int]


class RegressionForm(str, Enum):
    SPHERICAL = 'spherical'
    DIAGONAL = 'diagonal'
    GENERAL = 'general'

    def omega_params(self, q: int) -> int:
        if self is RegressionForm.SPHERICAL:
            return 1
        if self is RegressionForm.DIAGONAL:
            return q
        return q * (q + 1) // 2


class IndepForm(str, Enum):
    SPHERICAL = 'spherical'
    DIAGONAL = 'diagonal'


class Variant(str, Enum):
    """Restrictions of the role search.

    ``rdmcm`` allows both redundant and independent roles with selected
    predictors; ``regression`` keeps the stepwise predictor set whenever it
    is non-empty; ``full_regression`` regresses every non-clustering variable
    on all of S; ``independent`` makes every non-clustering variable
    independent of S.
    """

    RDMCM = 'rdmcm'
    REGRESSION = 'regression'
    FULL_REGRESSION = 'full_regression'
    INDEPENDENT = 'independent'


@dataclass(frozen=True)
class VariableRoles:
    S: Indices
    U: Indices = frozenset()
    W: Indices = frozenset()
    R: Indices = frozenset()

    def __post_init__(self):
        for name in ('S', 'U', 'W', 'R'):
            object.__setattr__(self, name, frozenset(int(j) for j in getattr(self, name)))
        if not self.S:
            raise ValueError("the relevant set S must be non-empty")
        if self.S & self.U or self.S & self.W or self.U & self.W:
            raise ValueError("S, U and W must be pairwise disjoint")
        if not self.R <= self.S:
            raise ValueError("predictors R must be relevant variables")
        if bool(self.R) != bool(self.U):
            raise ValueError("R is empty exactly when U is empty")

    @classmethod
    def all_relevant(cls, p: int) -> "VariableRoles":
        return cls(S=frozenset(range(p)))

    @property
    def p(self) -> int:
        return len(self.S) + len(self.U) + len(self.W)

    def covers(self, p: int) -> bool:
        return (self.S | self.U | self.W) == frozenset(range(p))

    def role_of(self, j: int) -> str:
        if j in self.S:
            return 'relevant'
        if j in self.U:
            return 'redundant'
        if j in self.W:
            return 'independent'
        raise KeyError(j)

    def as_dict(self, one_based: bool = True) -> Dict[str, List[int]]:
        shift = 1 if one_based else 0
        return {name: sorted(j + shift for j in getattr(self, name)) for name in ('S', 'R', 'U', 'W')}


@dataclass(eq=False)
class RegressionFit:
    U: Tuple[int, ...]
    R: Tuple[int, ...]
    a: np.ndarray
    b: np.ndarray
    omega: np.ndarray
    form_r: RegressionForm
    loglik: float
    bic: float

    @property
    def nu(self) -> int:
        q = len(self.U)
        return q * (1 + len(self.R)) + self.form_r.omega_params(q)


@dataclass(eq=False)
class IndepFit:
    W: Tuple[int, ...]
    gamma: np.ndarray
    tau: np.ndarray
    form_l: IndepForm
    loglik: float
    bic: float

    @property
    def nu(self) -> int:
        return len(self.W) + (1 if self.form_l is IndepForm.SPHERICAL else len(self.W))


@dataclass(eq=False)
class SearchStep:
    """State after an accepted move (step 0 is the all-relevant start)."""

    step: int
    move: str
    variable: Optional[int]
    roles: VariableRoles
    mixture_bic: float
    block_bics: Dict[int, float]
    criterion: float


@dataclass(eq=False)
class SelectedModel:
    roles: VariableRoles
    mixture: MixtureFit
    regression: Optional[RegressionFit]
    indep: Optional[IndepFit]
    criterion: float
    trace: List[SearchStep] = field(default_factory=list)

    @property
    def labels(self) -> np.ndarray:
        return self.mixture.labels

    @property
    def selected(self) -> Indices:
        return self.roles.S


def _values(data: Union[DataMatrix, np.ndarray]) -> np.ndarray:
    return data.values if isinstance(data, DataMatrix) else DataMatrix(data).values


def _gaussian_loglik(E: np.ndarray, cov: np.ndarray) -> float:
    """Log-likelihood of zero-mean Gaussian residual rows ``E``."""
    n, q = E.shape
    chol = linalg.cholesky(cov, lower=True)
    z = linalg.solve_triangular(chol, E.T, lower=True)
    log_det = 2.0 * np.log(np.diag(chol)).sum()
    return float(-0.5 * (n * q * LOG_2PI + n * log_det + np.einsum('ij,ij->', z, z)))


def fit_regression(data: Union[DataMatrix, np.ndarray], U: Iterable[int], R: Iterable[int],
                   form_r: Union[str, RegressionForm] = RegressionForm.GENERAL) -> RegressionFit:
    """Least-squares regression of the columns U on [1, y^R] with an MLE residual covariance."""
    X = _values(data)
    U, R = tuple(sorted(U)), tuple(sorted(R))
    form_r = RegressionForm(form_r)
    if not U:
        raise ValueError("the redundant set U must be non-empty")
    n = X.shape[0]
    if n <= len(R) + 1:
        raise RankDeficient(f"n={n} is too small for {len(R)} predictors")
    design = np.column_stack([np.ones(n), X[:, list(R)]])
    if np.linalg.matrix_rank(design) < len(R) + 1:
        raise RankDeficient(f"design on predictors {[r + 1 for r in R]} is rank deficient")
    Y = X[:, list(U)]
    coef, *_ = np.linalg.lstsq(design, Y, rcond=None)
    E = Y - design @ coef
    S = E.T @ E / n
    q = len(U)

    if form_r is RegressionForm.SPHERICAL:
        omega = max(np.trace(S) / q, VARIANCE_FLOOR) * np.eye(q)
    elif form_r is RegressionForm.DIAGONAL:
        omega = np.diag(np.maximum(np.diag(S), VARIANCE_FLOOR))
    else:
        omega = S.copy()
        np.fill_diagonal(omega, np.maximum(np.diag(S), VARIANCE_FLOOR))
        eig = np.linalg.eigvalsh(omega)
        if eig[0] <= 1e-12 * eig[-1]:
            raise SingularOmega(f"residual covariance of {[u + 1 for u in U]} is singular")
    try:
        loglik = _gaussian_loglik(E, omega)
    except linalg.LinAlgError as e:
        raise SingularOmega(f"residual covariance of {[u + 1 for u in U]} is not positive definite") from e

    nu = q * (1 + len(R)) + form_r.omega_params(q)
    return RegressionFit(U=U, R=R, a=coef[0], b=coef[1:], omega=omega, form_r=form_r,
                         loglik=loglik, bic=2.0 * loglik - nu * math.log(n))


def fit_indep(data: Union[DataMatrix, np.ndarray], W: Iterable[int],
              form_l: Union[str, IndepForm] = IndepForm.DIAGONAL, strict: bool = False) -> IndepFit:
    """Independent Gaussian block with spherical or diagonal covariance."""
    X = _values(data)
    W = tuple(sorted(W))
    form_l = IndepForm(form_l)
    if not W:
        raise ValueError("the independent set W must be non-empty")
    n = X.shape[0]
    if n < 2:
        raise ValueError("at least two observations are needed")
    Y = X[:, list(W)]
    gamma = Y.mean(axis=0)
    var = Y.var(axis=0)
    if np.any(var < VARIANCE_FLOOR):
        constant = [W[j] + 1 for j in np.flatnonzero(var < VARIANCE_FLOOR)]
        if strict and form_l is IndepForm.DIAGONAL:
            raise ZeroVariance(f"constant column(s) {constant}")
        logger.warning(f"variance floor applied to column(s) {constant}")
    if form_l is IndepForm.SPHERICAL:
        tau_diag = np.full(len(W), max(var.mean(), VARIANCE_FLOOR))
    else:
        tau_diag = np.maximum(var, VARIANCE_FLOOR)
    loglik = float(-0.5 * (n * len(W) * LOG_2PI + n * np.log(tau_diag).sum()
                           + (((Y - gamma) ** 2) / tau_diag).sum()))
    nu = len(W) + (1 if form_l is IndepForm.SPHERICAL else len(W))
    return IndepFit(W=W, gamma=gamma, tau=np.diag(tau_diag), form_l=form_l, loglik=loglik,
                    bic=2.0 * loglik - nu * math.log(n))


def criterion(data: Union[DataMatrix, np.ndarray], roles: VariableRoles, K: int,
              family: Union[str, CovarianceFamily],
              form_r: Union[str, RegressionForm] = RegressionForm.GENERAL,
              form_l: Union[str, IndepForm] = IndepForm.DIAGONAL,
              config: EMConfig = EMConfig()) -> SelectedModel:
    """Fit the three blocks of ``roles`` and return the sum of their BICs."""
    X = _values(data)
    if not roles.covers(X.shape[1]):
        raise ValueError(f"roles do not partition the {X.shape[1]} variables")
    mixture = em_fit(X[:, sorted(roles.S)], K, family, config)
    regression = fit_regression(X, roles.U, roles.R, form_r) if roles.U else None
    indep = fit_indep(X, roles.W, form_l) if roles.W else None
    total = mixture.bic + (regression.bic if regression else 0.0) + (indep.bic if indep else 0.0)
    return SelectedModel(roles=roles, mixture=mixture, regression=regression, indep=indep, criterion=total)


# single-response regressions from a centred Gram matrix

def _single_bic(rss: float, n_predictors: int, n: int) -> float:
    rss = max(rss, 0.0)
    v = max(rss / n, VARIANCE_FLOOR)
    loglik = -0.5 * (n * LOG_2PI + n * math.log(v) + rss / v)
    return 2.0 * loglik - (n_predictors + 2) * math.log(n)


class _Gram:
    """Cross products of the centred data, shared by every regression of the search."""

    def __init__(self, X: np.ndarray):
        self.n = X.shape[0]
        Z = X - X.mean(axis=0)
        self.G = Z.T @ Z

    def indep_bic(self, j: int) -> float:
        # mean and variance: two parameters, same as a regression on no predictor
        return _single_bic(self.G[j, j], 0, self.n)

    def regression_bic(self, j: int, R: Sequence[int]) -> float:
        R = list(R)
        if not R:
            return self.indep_bic(j)
        inv, beta = self._solve(j, R)
        rss = self.G[j, j] - self.G[R, j] @ beta
        return _single_bic(rss, len(R), self.n)

    def _solve(self, j: int, R: List[int]) -> Tuple[np.ndarray, np.ndarray]:
        if self.n <= len(R) + 1:
            raise RankDeficient(f"n={self.n} is too small for {len(R)} predictors")
        G = self.G[np.ix_(R, R)]
        eig = np.linalg.eigvalsh(G)
        if eig[0] <= 1e-10 * max(eig[-1], 1e-300):
            raise RankDeficient(f"predictors {[r + 1 for r in R]} are collinear")
        inv = np.linalg.inv(G)
        return inv, inv @ self.G[R, j]

    def backward(self, j: int, candidates: Iterable[int]) -> Tuple[Indices, float]:
        """Backward elimination of predictors of column j by regression BIC.

        Each round scores every single drop from the current inverse Gram
        matrix and downdates it for the accepted drop.
        """
        current = sorted(candidates)
        if not current:
            return frozenset(), self.indep_bic(j)
        inv, beta = self._solve(j, current)
        rss = self.G[j, j] - self.G[current, j] @ beta
        best = _single_bic(rss, len(current), self.n)
        while current:
            d = np.diag(inv)
            drop_rss = rss + beta ** 2 / d
            scores = [_single_bic(r, len(current) - 1, self.n) for r in drop_rss]
            m = int(np.argmax(scores))
            if not scores[m] > best:
                break
            best, rss = scores[m], drop_rss[m]
            keep = np.arange(len(current)) != m
            col = inv[keep, m]
            beta = beta[keep] - col * beta[m] / d[m]
            inv = inv[np.ix_(keep, keep)] - np.outer(col, col) / d[m]
            del current[m]
        return frozenset(current), best


def select_predictors(data: Union[DataMatrix, np.ndarray], u_vars: Iterable[int], candidates: Iterable[int],
                      forms_r: Sequence[Union[str, RegressionForm]] = tuple(RegressionForm)
                      ) -> Tuple[Indices, RegressionForm]:
    """Backward stepwise choice of the predictors R of the block ``u_vars``.

    Starting from all candidates, drop the predictor whose removal most
    increases the regression BIC (best form at each evaluation) until no
    removal helps. The returned R may be empty.
    """
    X = _values(data)
    U = sorted(u_vars)
    forms = [RegressionForm(f) for f in forms_r]
    if not U or not forms:
        raise ValueError("u_vars and forms_r must be non-empty")

    if len(U) == 1:
        # one response: all three forms have the same likelihood and count
        R, _ = _Gram(X).backward(U[0], candidates)
        return R, forms[0]

    def score(R) -> Tuple[float, RegressionForm]:
        best = None
        for form in forms:
            try:
                bic = fit_regression(X, U, R, form).bic
            except SingularOmega:
                continue
            if best is None or bic > best[0]:
                best = (bic, form)
        if best is None:
            raise SingularOmega(f"no residual covariance form fits block {[u + 1 for u in U]}")
        return best

    current = sorted(candidates)
    best_bic, best_form = score(current)
    while current:
        trials = [(score(current[:i] + current[i + 1:]), i) for i in range(len(current))]
        (bic, form), i = max(trials, key=lambda item: (item[0][0], -item[1]))
        if not bic > best_bic:
            break
        best_bic, best_form = bic, form
        del current[i]
    return frozenset(current), best_form


# role search

@dataclass(frozen=True)
class _Exclusion:
    role: str
    R: Indices
    score: float


@dataclass(eq=False)
class _State:
    S: Indices
    mixture: MixtureFit
    excluded: Dict[int, _Exclusion]

    @property
    def value(self) -> float:
        return self.mixture.bic + sum(e.score for e in self.excluded.values())

    def roles(self) -> VariableRoles:
        U = frozenset(j for j, e in self.excluded.items() if e.role == 'U')
        W = frozenset(j for j, e in self.excluded.items() if e.role == 'W')
        R = frozenset().union(*(e.R for e in self.excluded.values() if e.role == 'U'))
        return VariableRoles(S=self.S, U=U, W=W, R=R)


class RoleSearch:
    """Stepwise search over role partitions with cached block fits."""

    def __init__(self, data: Union[DataMatrix, np.ndarray], K_set: Sequence[int],
                 families: Sequence[Union[str, CovarianceFamily]], em_config: EMConfig = EMConfig(),
                 search_config: SearchConfig = SearchConfig()):
        self.X = _values(data)
        self.p = self.X.shape[1]
        if self.p < 2:
            raise ValueError("variable selection needs at least two variables")
        self.K_set = sorted(set(int(k) for k in K_set))
        self.families = [CovarianceFamily.parse(f) for f in families]
        if not self.K_set or not self.families:
            raise ValueError("K_set and families must be non-empty")
        self.em_config = em_config
        self.search_config = search_config
        self.variant = Variant(search_config.variant)
        self.gram = _Gram(self.X)
        self._mixtures: Dict[Indices, Optional[MixtureFit]] = {}
        self.trace: List[SearchStep] = []

    def mixture(self, S: Indices, warm: Optional[MixtureFit] = None) -> Optional[MixtureFit]:
        if S not in self._mixtures:
            config = replace(self.em_config, n_starts=self.search_config.search_starts)
            try:
                self._mixtures[S] = best_mixture(self.X[:, sorted(S)], self.K_set, self.families,
                                                 config, warm=warm)
            except (DegenerateFit, SingularData) as e:
                logger.debug(f"no mixture for S={sorted(j + 1 for j in S)}: {e}")
                self._mixtures[S] = None
        return self._mixtures[S]

    def exclusion(self, j: int, S: Indices) -> _Exclusion:
        """Best non-clustering role of variable j given the relevant set S."""
        indep = self.gram.indep_bic(j)
        if self.variant is Variant.INDEPENDENT:
            return _Exclusion('W', frozenset(), indep)
        try:
            if self.variant is Variant.FULL_REGRESSION:
                R, reg = S, self.gram.regression_bic(j, sorted(S))
                return _Exclusion('U', frozenset(R), reg)
            R, reg = self.gram.backward(j, S)
        except RankDeficient as e:
            logger.debug(f"regression of variable {j + 1} unavailable: {e}")
            return _Exclusion('W', frozenset(), indep)
        if R and (reg > indep or self.variant is Variant.REGRESSION):
            return _Exclusion('U', R, reg)
        return _Exclusion('W', frozenset(), indep)

    def _needs_refit(self, e: _Exclusion, removed: Optional[int]) -> bool:
        if self.variant is Variant.FULL_REGRESSION:
            return True
        # an inclusion can give any excluded variable a new predictor
        return removed is None or removed in e.R

    def candidate(self, state: _State, j: int) -> Optional[_State]:
        """State after moving variable j out of S (j in S) or back into S."""
        if j in state.S:
            S = state.S - {j}
            removed = j
        else:
            S = state.S | {j}
            removed = None
        mixture = self.mixture(S, warm=state.mixture)
        if mixture is None:
            return None
        excluded = {}
        for k, e in state.excluded.items():
            if k == j:
                continue
            excluded[k] = self.exclusion(k, S) if self._needs_refit(e, removed) else e
        if removed is not None:
            excluded[j] = self.exclusion(j, S)
        return _State(S=S, mixture=mixture, excluded=excluded)

    def _record(self, state: _State, move: str, variable: Optional[int]):
        step = state.roles()
        self.trace.append(SearchStep(
            step=len(self.trace), move=move, variable=variable, roles=step,
            mixture_bic=state.mixture.bic,
            block_bics={k: e.score for k, e in sorted(state.excluded.items())},
            criterion=state.value,
        ))

    def run(self) -> _State:
        S = frozenset(range(self.p))
        try:
            mixture = best_mixture(self.X, self.K_set, self.families, self.em_config)
        except (DegenerateFit, SingularData) as e:
            raise SearchFailed(f"the all-relevant model cannot be fitted: {e}") from e
        self._mixtures[S] = mixture
        state = _State(S=S, mixture=mixture, excluded={})
        self._record(state, 'start', None)

        while True:
            moves = [j for j in sorted(state.S) if len(state.S) > 1]
            moves += [j for j in sorted(state.excluded)]
            if self.search_config.n_jobs == 1:
                results = [self.candidate(state, j) for j in moves]
            else:
                # warm mixtures for every candidate, evaluated on threads
                results = Parallel(n_jobs=self.search_config.n_jobs, prefer='threads')(
                    delayed(self.candidate)(state, j) for j in moves)

            best, best_key = None, None
            current = state.value
            for j, cand in zip(moves, results):
                if cand is None:
                    continue
                gain = cand.value - current
                # ties: removals before inclusions, then lower index
                key = (gain, j in state.S, -j)
                if best_key is None or key > best_key:
                    best, best_key = (j, cand), key
            if best is None or not best_key[0] > 0:
                break
            j, state = best
            move = 'remove' if j not in state.S else 'include'
            logger.info(f"{move} variable {j + 1}: criterion {current:.3f} -> {state.value:.3f}")
            self._record(state, move, j)
        return state


def _best_regression(X: np.ndarray, roles: VariableRoles, forms_r) -> Optional[RegressionFit]:
    if not roles.U:
        return None
    best = None
    for form in forms_r:
        try:
            fit = fit_regression(X, roles.U, roles.R, form)
        except SingularOmega:
            continue
        if best is None or fit.bic > best.bic:
            best = fit
    if best is None:
        raise SingularOmega(f"no residual covariance form fits block {sorted(u + 1 for u in roles.U)}")
    return best


def _best_indep(X: np.ndarray, roles: VariableRoles, forms_l) -> Optional[IndepFit]:
    if not roles.W:
        return None
    fits = [fit_indep(X, roles.W, form) for form in forms_l]
    return max(fits, key=lambda fit: fit.bic)


def select_roles(data: Union[DataMatrix, np.ndarray], K_set: Sequence[int],
                 families: Sequence[Union[str, CovarianceFamily]], em_config: EMConfig = EMConfig(),
                 search_config: SearchConfig = SearchConfig()) -> SelectedModel:
    """Stepwise role search followed by a joint refit of the U and W blocks.

    The redundant block is regressed jointly on the union of the predictor
    sets found for its variables, with the regression and independent
    covariance forms re-selected by BIC.
    """
    X = _values(data)
    search = RoleSearch(X, K_set, families, em_config, search_config)
    state = search.run()
    roles = state.roles()
    forms_r = [RegressionForm(f) for f in search_config.forms_r]
    forms_l = [IndepForm(f) for f in search_config.forms_l]
    regression = _best_regression(X, roles, forms_r)
    indep = _best_indep(X, roles, forms_l)
    total = state.mixture.bic + (regression.bic if regression else 0.0) + (indep.bic if indep else 0.0)
    logger.info(f"selected S={sorted(j + 1 for j in roles.S)} with K={state.mixture.K} "
                f"({state.mixture.family.code}), criterion {total:.3f}")
    return SelectedModel(roles=roles, mixture=state.mixture, regression=regression, indep=indep,
                         criterion=total, trace=search.trace)
