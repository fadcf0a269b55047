"""Run-time configuration.

Defaults come from the packaged ``varselclust.ini``; the file named by the
``VARSELCLUST_CONFIG`` environment variable is read on top of it. Each
section is exposed as a frozen dataclass so that a configuration can be
passed around, hashed and written to a run manifest.
"""

import os
import configparser
from dataclasses import dataclass, field, asdict, replace
from pathlib import Path
from typing import Dict, Optional, Tuple

from .errors import ConfigInvalid
from .log import get_logger

logger = get_logger(__name__)

DEFAULT_INI = Path(__file__).with_name('varselclust.ini')


@dataclass(frozen=True)
class EMConfig:
    n_starts: Optional[int] = None
    tol: float = 1e-6
    max_iter: int = 500
    rng_seed: int = 0
    floor_scale: float = 1e-6
    max_floor_hits: int = 50
    vee_inner_iter: int = 20
    n_jobs: int = 1

    def starts_for(self, K: int) -> int:
        if self.n_starts is not None:
            return self.n_starts
        return 10 if K <= 10 else 20

    def with_seed(self, rng_seed: int) -> "EMConfig":
        return replace(self, rng_seed=int(rng_seed))


@dataclass(frozen=True)
class SearchConfig:
    variant: str = 'rdmcm'
    search_starts: int = 2
    forms_r: Tuple[str, ...] = ('spherical', 'diagonal', 'general')
    forms_l: Tuple[str, ...] = ('spherical', 'diagonal')
    n_jobs: int = 1


@dataclass(frozen=True)
class SparseConfig:
    max_iter: int = 20
    n_starts: int = 1
    kmeans_restarts: int = 10
    kmeans_max_iter: int = 100
    n_perm: int = 25
    n_t: int = 10
    t_min: float = 1.1
    tol: float = 1e-4


@dataclass(frozen=True)
class BenchDefaults:
    replicates_exp1: int = 25
    replicates_exp2: int = 50
    replicates_other: int = 1
    desk_replicates: int = 10
    families: Dict[str, Tuple[str, ...]] = field(default_factory=lambda: {
        'exp1': ('spherical_equal',),
        'exp2': ('spherical_equal', 'spherical_varying', 'diagonal_equal', 'diagonal_varying'),
        'waveform': ('diagonal_equal', 'diagonal_varying', 'eee'),
        'csv': ('spherical_equal', 'spherical_varying', 'diagonal_equal', 'diagonal_varying',
                'eee', 'vee', 'vvv'),
    })
    output_dir: str = 'results'


@dataclass(frozen=True)
class Settings:
    em: EMConfig = field(default_factory=EMConfig)
    search: SearchConfig = field(default_factory=SearchConfig)
    sparse: SparseConfig = field(default_factory=SparseConfig)
    bench: BenchDefaults = field(default_factory=BenchDefaults)

    def as_dict(self) -> dict:
        return asdict(self)


def _split(value: str) -> Tuple[str, ...]:
    return tuple(v.strip() for v in value.split(',') if v.strip())


def _read(parser: configparser.ConfigParser) -> Settings:
    try:
        em = parser['em']
        n_starts = em.get('n_starts', '').strip()
        em_cfg = EMConfig(
            n_starts=int(n_starts) if n_starts else None,
            tol=em.getfloat('tol', 1e-6),
            max_iter=em.getint('max_iter', 500),
            floor_scale=em.getfloat('floor_scale', 1e-6),
            max_floor_hits=em.getint('max_floor_hits', 50),
            vee_inner_iter=em.getint('vee_inner_iter', 20),
            n_jobs=em.getint('n_jobs', 1),
        )
        se = parser['search']
        search_cfg = SearchConfig(
            variant=se.get('variant', 'rdmcm').strip(),
            search_starts=se.getint('search_starts', 2),
            forms_r=_split(se.get('forms_r', 'spherical, diagonal, general')),
            forms_l=_split(se.get('forms_l', 'spherical, diagonal')),
            n_jobs=se.getint('n_jobs', 1),
        )
        sp = parser['sparse']
        sparse_cfg = SparseConfig(
            max_iter=sp.getint('max_iter', 20),
            n_starts=sp.getint('n_starts', 1),
            kmeans_restarts=sp.getint('kmeans_restarts', 10),
            kmeans_max_iter=sp.getint('kmeans_max_iter', 100),
            n_perm=sp.getint('n_perm', 25),
            n_t=sp.getint('n_t', 10),
            t_min=sp.getfloat('t_min', 1.1),
            tol=sp.getfloat('tol', 1e-4),
        )
        be = parser['bench']
        families = {
            key[len('families_'):]: _split(value)
            for key, value in be.items() if key.startswith('families_')
        }
        bench_cfg = BenchDefaults(
            replicates_exp1=be.getint('replicates_exp1', 25),
            replicates_exp2=be.getint('replicates_exp2', 50),
            replicates_other=be.getint('replicates_other', 1),
            desk_replicates=be.getint('desk_replicates', 10),
            families={**BenchDefaults().families, **families},
            output_dir=be.get('output_dir', 'results'),
        )
    except (KeyError, ValueError) as e:
        raise ConfigInvalid(f"invalid configuration file: {e}") from e
    return Settings(em=em_cfg, search=search_cfg, sparse=sparse_cfg, bench=bench_cfg)


def load_config(path: Optional[str] = None) -> Settings:
    """Read the packaged defaults, then ``path`` or ``$VARSELCLUST_CONFIG``."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(';', '#'))
    parser.read(DEFAULT_INI, encoding='utf-8')
    override = path or os.getenv('VARSELCLUST_CONFIG')
    if override:
        if not os.path.isfile(override):
            raise ConfigInvalid(f"configuration file '{override}' not found")
        parser.read(override, encoding='utf-8')
        logger.debug(f"configuration override read from {override}")
    return _read(parser)
