"""Gaussian mixtures fitted by EM under constrained covariance families.

Families follow the eigenvalue-decomposition naming of model-based
clustering software (volume, shape, orientation equal or varying across
components):

    ==================  ======  ===================================
    family              code    covariance
    ==================  ======  ===================================
    SPHERICAL_EQUAL     EII     lambda I
    SPHERICAL_VARYING   VII     lambda_k I
    DIAGONAL_EQUAL      EEI     B (diagonal)
    DIAGONAL_VARYING    VVI     B_k (diagonal)
    EEE                 EEE     Sigma
    VEE                 VEE     lambda_k C, det C = 1
    VVV                 VVV     Sigma_k
    ==================  ======  ===================================

Model scores use the maximisation convention ``bic = 2 loglik - nu log n``.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed
from scipy import linalg
from scipy.special import logsumexp

from .config import EMConfig
from .data import DataMatrix
from .errors import DegenerateFit, SingularData
from .log import get_logger

logger = get_logger(__name__)

LOG_2PI = math.log(2.0 * math.pi)


class CovarianceFamily(str, Enum):
    SPHERICAL_EQUAL = 'spherical_equal'
    SPHERICAL_VARYING = 'spherical_varying'
    DIAGONAL_EQUAL = 'diagonal_equal'
    DIAGONAL_VARYING = 'diagonal_varying'
    EEE = 'eee'
    VEE = 'vee'
    VVV = 'vvv'

    @classmethod
    def parse(cls, value: Union[str, "CovarianceFamily"]) -> "CovarianceFamily":
        """Accept a family value, its member name or its three-letter code."""
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        for member in cls:
            if key in (member.value, member.name.lower(), member.code.lower()):
                return member
        raise ValueError(f"unknown covariance family '{value}'")

    @property
    def code(self) -> str:
        return _CODES[self]

    @property
    def is_diagonal(self) -> bool:
        return self in (CovarianceFamily.SPHERICAL_EQUAL, CovarianceFamily.SPHERICAL_VARYING,
                        CovarianceFamily.DIAGONAL_EQUAL, CovarianceFamily.DIAGONAL_VARYING)

    def cov_params(self, K: int, p: int) -> int:
        full = p * (p + 1) // 2
        return {
            CovarianceFamily.SPHERICAL_EQUAL: 1,
            CovarianceFamily.SPHERICAL_VARYING: K,
            CovarianceFamily.DIAGONAL_EQUAL: p,
            CovarianceFamily.DIAGONAL_VARYING: K * p,
            CovarianceFamily.EEE: full,
            CovarianceFamily.VEE: full + (K - 1),
            CovarianceFamily.VVV: K * full,
        }[self]


_CODES = {
    CovarianceFamily.SPHERICAL_EQUAL: 'EII',
    CovarianceFamily.SPHERICAL_VARYING: 'VII',
    CovarianceFamily.DIAGONAL_EQUAL: 'EEI',
    CovarianceFamily.DIAGONAL_VARYING: 'VVI',
    CovarianceFamily.EEE: 'EEE',
    CovarianceFamily.VEE: 'VEE',
    CovarianceFamily.VVV: 'VVV',
}


def param_count(K: int, p: int, family: CovarianceFamily) -> int:
    """Free parameters: proportions, means and covariance terms."""
    if K < 1 or p < 1:
        raise ValueError(f"K and p must be positive, got K={K}, p={p}")
    family = CovarianceFamily.parse(family)
    return (K - 1) + K * p + family.cov_params(K, p)


@dataclass(eq=False)
class MixtureFit:
    K: int
    family: CovarianceFamily
    pi: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    loglik: float
    bic: float
    resp: np.ndarray
    labels: np.ndarray
    n_iter: int = 0
    converged: bool = False
    loglik_trace: List[float] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.resp.shape[0]

    @property
    def p(self) -> int:
        return self.mu.shape[1]

    @property
    def nu(self) -> int:
        return param_count(self.K, self.p, self.family)

    def predict_proba(self, values: np.ndarray) -> np.ndarray:
        _, resp = _e_step(np.atleast_2d(np.asarray(values, dtype=float)), self.pi, self.mu, self.sigma)
        return resp

    def predict(self, values: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba(values), axis=1)


def bic_mixture(fit: MixtureFit, n: int) -> float:
    """``2 loglik - nu log n``; larger is better."""
    return 2.0 * fit.loglik - fit.nu * math.log(n)


class _Collapse(Exception):
    """A start lost a component; the start is discarded."""


def _as_array(data: Union[DataMatrix, np.ndarray]) -> np.ndarray:
    if isinstance(data, DataMatrix):
        return data.values
    return DataMatrix(data).values


def _log_gaussian(X: np.ndarray, mu: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    chol = linalg.cholesky(sigma, lower=True)
    z = linalg.solve_triangular(chol, (X - mu).T, lower=True)
    log_det = 2.0 * np.log(np.diag(chol)).sum()
    return -0.5 * (X.shape[1] * LOG_2PI + log_det + np.einsum('ij,ij->j', z, z))


def _e_step(X, pi, mu, sigma) -> Tuple[float, np.ndarray]:
    log_prob = np.column_stack([
        math.log(pi[k]) + _log_gaussian(X, mu[k], sigma[k]) for k in range(len(pi))
    ])
    norm = logsumexp(log_prob, axis=1)
    resp = np.exp(log_prob - norm[:, None])
    resp /= resp.sum(axis=1, keepdims=True)
    return float(norm.sum()), resp


def _family_covariance(S: np.ndarray, family: CovarianceFamily) -> np.ndarray:
    """Project a covariance matrix onto the structure of ``family``."""
    p = S.shape[0]
    if family in (CovarianceFamily.SPHERICAL_EQUAL, CovarianceFamily.SPHERICAL_VARYING):
        return np.trace(S) / p * np.eye(p)
    if family in (CovarianceFamily.DIAGONAL_EQUAL, CovarianceFamily.DIAGONAL_VARYING):
        return np.diag(np.diag(S))
    return S.copy()


def _unit_det(M: np.ndarray) -> Tuple[np.ndarray, float]:
    """Split ``M`` into ``volume * C`` with ``det C = 1``."""
    sign, log_det = np.linalg.slogdet(M)
    if sign <= 0:
        raise _Collapse()
    volume = math.exp(log_det / M.shape[0])
    return M / volume, volume


class _EMRun:
    """One EM start. Holds the VEE shape between M-steps."""

    def __init__(self, X: np.ndarray, K: int, family: CovarianceFamily, config: EMConfig, floor: float):
        self.X = X
        self.K = K
        self.family = family
        self.config = config
        self.floor = floor
        self.floor_hits = 0
        self.shape: Optional[np.ndarray] = None

    def _apply_floor(self, sigma: np.ndarray) -> np.ndarray:
        floor = self.floor
        for k in range(self.K):
            if self.family.is_diagonal:
                smallest = np.diag(sigma[k]).min()
            else:
                smallest = np.linalg.eigvalsh(sigma[k])[0]
            if smallest < floor:
                self.floor_hits += 1
                if self.family is CovarianceFamily.VEE:
                    # raising the volume keeps the shared shape and orientation
                    sigma[k] *= floor / max(smallest, floor * 1e-12)
                else:
                    sigma[k] += floor * np.eye(sigma.shape[1])
        if self.floor_hits > self.config.max_floor_hits:
            raise _Collapse()
        return sigma

    def m_step(self, resp: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        X, K, family = self.X, self.K, self.family
        n, p = X.shape
        nk = resp.sum(axis=0)
        if np.any(nk < 10 * np.finfo(float).eps * n):
            raise _Collapse()
        pi = nk / n
        mu = (resp.T @ X) / nk[:, None]
        sigma = np.empty((K, p, p))

        if family.is_diagonal:
            scatter = np.stack([(resp[:, k, None] * (X - mu[k]) ** 2).sum(axis=0) for k in range(K)])
            if family is CovarianceFamily.SPHERICAL_EQUAL:
                sigma[:] = scatter.sum() / (n * p) * np.eye(p)
            elif family is CovarianceFamily.SPHERICAL_VARYING:
                for k in range(K):
                    sigma[k] = scatter[k].sum() / (nk[k] * p) * np.eye(p)
            elif family is CovarianceFamily.DIAGONAL_EQUAL:
                sigma[:] = np.diag(scatter.sum(axis=0) / n)
            else:
                for k in range(K):
                    sigma[k] = np.diag(scatter[k] / nk[k])
            return pi, mu, self._apply_floor(sigma)

        scatter = np.empty((K, p, p))
        for k in range(K):
            diff = X - mu[k]
            scatter[k] = (resp[:, k, None] * diff).T @ diff
        if family is CovarianceFamily.EEE:
            sigma[:] = scatter.sum(axis=0) / n
        elif family is CovarianceFamily.VVV:
            sigma[:] = scatter / nk[:, None, None]
        else:
            sigma = self._vee(scatter, nk)
        return pi, mu, self._apply_floor(sigma)

    def _vee(self, scatter: np.ndarray, nk: np.ndarray) -> np.ndarray:
        """Conditional updates of volumes and the common shape matrix."""
        K, p, _ = scatter.shape
        if self.shape is None:
            self.shape, _ = _unit_det(scatter.sum(axis=0) / nk.sum())
        shape = self.shape
        volumes = np.ones(K)
        for _ in range(self.config.vee_inner_iter):
            inv = np.linalg.inv(shape)
            volumes = np.array([np.trace(scatter[k] @ inv) / (p * nk[k]) for k in range(K)])
            if np.any(volumes <= 0):
                raise _Collapse()
            new_shape, _ = _unit_det((scatter / volumes[:, None, None]).sum(axis=0))
            change = np.abs(new_shape - shape).max()
            shape = new_shape
            if change < 1e-10:
                break
        self.shape = shape
        volumes = np.array([np.trace(scatter[k] @ np.linalg.inv(shape)) / (p * nk[k]) for k in range(K)])
        return volumes[:, None, None] * shape[None, :, :]

    def initial_parameters(self, rng: np.random.Generator, order: np.ndarray):
        X, K = self.X, self.K
        n, p = X.shape
        rows = order[rng.choice(n, size=K, replace=False)]
        mu = X[rows].copy()
        glob = np.atleast_2d(np.cov(X, rowvar=False, bias=True))
        base = _family_covariance(glob, self.family)
        base = base + self.floor * np.eye(p) if np.linalg.eigvalsh(base)[0] < self.floor else base
        if self.family is CovarianceFamily.VEE:
            self.shape, _ = _unit_det(base)
        sigma = np.repeat(base[None, :, :], K, axis=0)
        return np.full(K, 1.0 / K), mu, sigma

    def run(self, rng: Optional[np.random.Generator], order: np.ndarray,
            init_resp: Optional[np.ndarray]) -> Optional[MixtureFit]:
        X, config = self.X, self.config
        try:
            if init_resp is None:
                pi, mu, sigma = self.initial_parameters(rng, order)
                loglik, resp = _e_step(X, pi, mu, sigma)
                trace = [loglik]
            else:
                resp = init_resp
                loglik, trace = None, []

            converged = False
            n_iter = 0
            for n_iter in range(1, config.max_iter + 1):
                pi, mu, sigma = self.m_step(resp)
                new_loglik, resp = _e_step(X, pi, mu, sigma)
                trace.append(new_loglik)
                if loglik is not None and abs(new_loglik - loglik) < config.tol * max(abs(loglik), 1e-300):
                    loglik = new_loglik
                    converged = True
                    break
                loglik = new_loglik
        except (_Collapse, np.linalg.LinAlgError, linalg.LinAlgError, FloatingPointError, ValueError) as e:
            logger.debug(f"EM start discarded ({self.family.code}, K={self.K}): {type(e).__name__}")
            return None

        if not np.isfinite(loglik):
            return None
        nu = param_count(self.K, X.shape[1], self.family)
        return MixtureFit(
            K=self.K, family=self.family, pi=pi, mu=mu, sigma=sigma,
            loglik=float(loglik), bic=2.0 * loglik - nu * math.log(X.shape[0]),
            resp=resp, labels=np.argmax(resp, axis=1), n_iter=n_iter,
            converged=converged, loglik_trace=trace,
        )


def canonical_order(X: np.ndarray) -> np.ndarray:
    """Row order by row sum, then row sum of squares.

    Both keys are invariant to column permutations, so seeded start rows
    do not depend on the order of observations or variables.
    """
    return np.lexsort(((X ** 2).sum(axis=1), X.sum(axis=1)))


def _check_fit_data(X: np.ndarray, K: int):
    n = X.shape[0]
    if n <= K:
        raise SingularData(f"n={n} observations cannot support K={K} components")
    constant = np.flatnonzero(np.ptp(X, axis=0) == 0)
    if constant.size:
        raise SingularData(f"zero-variance column(s) {(constant + 1).tolist()}")


def em_fit(data: Union[DataMatrix, np.ndarray], K: int, family: Union[str, CovarianceFamily],
           config: EMConfig = EMConfig(), init_resp: Optional[np.ndarray] = None) -> MixtureFit:
    """Best of ``config.starts_for(K)`` EM runs by log-likelihood.

    ``init_resp`` adds a warm start (start index 0) whose first M-step uses
    the given n x K responsibilities; with ``config.n_starts == 0`` it is the
    only start.
    """
    X = _as_array(data)
    family = CovarianceFamily.parse(family)
    if K < 1:
        raise ValueError(f"K must be positive, got {K}")
    _check_fit_data(X, K)

    n_starts = config.starts_for(K)
    if init_resp is not None:
        init_resp = np.asarray(init_resp, dtype=float)
        if init_resp.shape != (X.shape[0], K):
            raise ValueError(f"init_resp has shape {init_resp.shape}, expected {(X.shape[0], K)}")
    elif n_starts < 1:
        raise ValueError("at least one start is required")

    floor = config.floor_scale * float(np.mean(np.var(X, axis=0)))
    order = canonical_order(X)
    seeds = np.random.SeedSequence(config.rng_seed).spawn(n_starts)

    jobs = []
    if init_resp is not None:
        jobs.append((None, init_resp))
    jobs.extend((np.random.default_rng(s), None) for s in seeds)

    def one(rng, resp0):
        return _EMRun(X, K, family, config, floor).run(rng, order, resp0)

    if config.n_jobs == 1 or len(jobs) == 1:
        fits = [one(rng, resp0) for rng, resp0 in jobs]
    else:
        fits = Parallel(n_jobs=config.n_jobs)(delayed(one)(rng, resp0) for rng, resp0 in jobs)

    best = None
    for fit in fits:
        if fit is not None and (best is None or fit.loglik > best.loglik):
            best = fit
    if best is None:
        raise DegenerateFit(f"all {len(jobs)} EM starts degenerated ({family.code}, K={K})")
    logger.debug(f"EM {family.code} K={K}: loglik={best.loglik:.4f} after {best.n_iter} iterations")
    return best


def best_mixture(data: Union[DataMatrix, np.ndarray], K_set: Sequence[int],
                 families: Sequence[Union[str, CovarianceFamily]], config: EMConfig = EMConfig(),
                 warm: Optional[MixtureFit] = None) -> MixtureFit:
    """Maximise BIC over ``K_set x families``.

    Ties go to the smaller parameter count, then the smaller K. ``warm``
    seeds every cell with the same K by its responsibilities.
    """
    if not K_set or not families:
        raise ValueError("K_set and families must be non-empty")
    X = _as_array(data)
    best, best_key = None, None
    failures = []
    for K in sorted(set(int(k) for k in K_set)):
        for family in dict.fromkeys(CovarianceFamily.parse(f) for f in families):
            init = warm.resp if warm is not None and warm.K == K and warm.n == X.shape[0] else None
            try:
                fit = em_fit(X, K, family, config, init_resp=init)
            except (DegenerateFit, SingularData) as e:
                logger.info(f"grid cell {family.code} K={K} failed: {e}")
                failures.append(e)
                continue
            key = (fit.bic, -fit.nu, -K)
            if best_key is None or key > best_key:
                best, best_key = fit, key
    if best is None:
        if all(isinstance(e, SingularData) for e in failures):
            raise failures[0]
        raise DegenerateFit(f"every grid cell failed ({len(failures)} cells)")
    return best
