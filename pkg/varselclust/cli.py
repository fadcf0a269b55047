#!/usr/bin/env python3

# Description: Command-line front end for variable selection in model-based clustering:
#              simulated benchmarks, single-dataset fits and sparse K-means tuning.
# License: MIT

import sys
import time
import argparse
from dataclasses import replace
from pathlib import Path
from typing import ClassVar, List, Optional, Sequence

import numpy as np
from jsoncolor import jprint
from rich import traceback as rich_traceback
from rich.console import Console
from rich.panel import Panel
from rich.table import Table
from rich_argparse import RichHelpFormatter, _lazy_rich as rr

from .__version__ import version
from .bench import (METRICS, BenchmarkResult, Method, RunConfig, run_benchmark,
                    write_outputs)
from .config import Settings, load_config
from .data import DataMatrix, load_csv
from .errors import ConfigInvalid, DataLoadError, VarselError
from .log import get_logger, traceback_enabled
from .modsel import Variant
from .simulate import Experiment, ScenarioSpec, generate
from .sparse import tune_t

logger = get_logger(__name__)
console = Console()

DEFAULT_K = {'exp1': 3, 'exp2': 4, 'waveform': 3}
METRIC_TITLES = {'ari': 'ARI', 'vser': 'VSER', 'n_selected': '#VarSel'}


class CustomRichHelpFormatter(RichHelpFormatter):
    """A custom RichHelpFormatter with enhanced styles."""

    styles: ClassVar[dict[str, rr.StyleType]] = {
        "argparse.args": "bold #FFFF00",
        "argparse.groups": "#AA55FF",
        "argparse.help": "bold #00FFFF",
        "argparse.metavar": "bold #FF00FF",
        "argparse.syntax": "underline",
        "argparse.text": "white",
        "argparse.prog": "bold #00AAFF italic",
        "argparse.default": "bold",
    }


def _int_list(value: str) -> List[int]:
    try:
        return [int(v) for v in value.replace(',', ' ').split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers, got '{value}'")


def _str_list(value: str) -> List[str]:
    return [v.strip() for v in value.split(',') if v.strip()]


def _add_method_options(parser: argparse.ArgumentParser):
    parser.add_argument(
        '-m', '--methods',
        help='Comma-separated methods: kmeans, sparse_kmeans, rdmcm (default: all)',
        type=_str_list,
        default=[m.value for m in Method],
        metavar='LIST'
    )
    parser.add_argument(
        '-K', '--K',
        help='Fixed number of clusters',
        type=int,
        metavar='K'
    )
    parser.add_argument(
        '--K-set',
        help='Candidate numbers of clusters for rdmcm, e.g. "2,3,4,5,6"',
        type=_int_list,
        metavar='LIST'
    )
    parser.add_argument(
        '-f', '--families',
        help='Comma-separated covariance families for rdmcm (names or codes like EII,VVV)',
        type=_str_list,
        metavar='LIST'
    )
    parser.add_argument(
        '--variant',
        help='Role search variant',
        choices=[v.value for v in Variant]
    )
    parser.add_argument(
        '-t', '--sparse-t',
        help='L1 bound for sparse K-means (default: chosen by the gap statistic)',
        type=float,
        metavar='T'
    )
    parser.add_argument(
        '-o', '--output-dir',
        help='Directory for results.csv, summary.csv, roles.csv, weights.csv and manifest.json',
        metavar='DIR'
    )
    parser.add_argument(
        '-j', '--n-jobs',
        help='Concurrent replicates (joblib)',
        type=int,
        default=1,
        metavar='N'
    )
    parser.add_argument(
        '--timing',
        help='Record runtime_seconds (results.csv is then no longer byte-reproducible)',
        action='store_true'
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='varselclust',
        description="🔎 Variable selection for clustering: model-based role search vs sparse K-means",
        formatter_class=CustomRichHelpFormatter
    )
    parser.add_argument('-v', '--version', action='version', version=f"%(prog)s {version}")
    parser.add_argument(
        '-c', '--config',
        help='INI file overriding the packaged defaults (also $VARSELCLUST_CONFIG)',
        metavar='FILE'
    )
    sub = parser.add_subparsers(dest='command', metavar='COMMAND')

    sim = sub.add_parser(
        'simulate',
        help='Replicate a simulated scenario and score every method',
        formatter_class=CustomRichHelpFormatter
    )
    sim.add_argument(
        '-e', '--experiment',
        help='Simulation setting',
        choices=[e.value for e in Experiment],
        required=True
    )
    sim.add_argument(
        '-s', '--scenario',
        help='Scenario number (1-5 for exp1, 1-3 for exp2)',
        type=int,
        default=1
    )
    sim.add_argument(
        '-n', '--n',
        help='Sample size (default: the scenario default)',
        type=int,
        metavar='N'
    )
    sim.add_argument(
        '-r', '--replicates',
        help='Number of replicates (default: 25 for exp1, 50 for exp2, 1 for waveform)',
        type=int,
        metavar='R'
    )
    sim.add_argument(
        '--desk',
        help='Reduced replicate preset for quick checks',
        action='store_true'
    )
    sim.add_argument(
        '--base-seed',
        help='Seed of replicate 0; replicate r uses base seed + r',
        type=int,
        default=0
    )
    _add_method_options(sim)

    fit = sub.add_parser(
        'fit',
        help='Fit the methods on one CSV dataset and show roles, weights and labels',
        formatter_class=CustomRichHelpFormatter
    )
    fit.add_argument('CSV', help='Comma-separated file with a header row and an optional "label" column')
    fit.add_argument('--seed', help='Random seed', type=int, default=0)
    fit.add_argument(
        '--labels-out',
        help='Write the cluster labels of every method to this CSV',
        metavar='FILE'
    )
    _add_method_options(fit)

    tune = sub.add_parser(
        'tune',
        help='Gap statistic curve of the sparse K-means L1 bound',
        formatter_class=CustomRichHelpFormatter
    )
    tune.add_argument('CSV', help='Input CSV (or use --experiment)', nargs='?')
    tune.add_argument('-e', '--experiment', choices=[e.value for e in Experiment])
    tune.add_argument('-s', '--scenario', type=int, default=1)
    tune.add_argument('-K', '--K', help='Number of clusters', type=int, metavar='K')
    tune.add_argument('-B', '--n-perm', help='Permuted datasets', type=int, metavar='B')
    tune.add_argument('--n-t', help='Number of bounds on the log-spaced grid', type=int, metavar='N')
    tune.add_argument('--seed', type=int, default=0)
    tune.add_argument('-j', '--n-jobs', type=int, default=1, metavar='N')
    tune.add_argument('-o', '--output-dir', help='Directory for gap.csv', metavar='DIR')
    return parser


def _families(args, settings: Settings, key: str) -> tuple:
    if args.families:
        return tuple(args.families)
    return tuple(settings.bench.families.get(key, settings.bench.families['csv']))


def _replicates(args, settings: Settings, experiment: Experiment) -> int:
    if args.replicates is not None:
        return args.replicates
    if args.desk:
        return settings.bench.desk_replicates
    return {
        Experiment.EXP1: settings.bench.replicates_exp1,
        Experiment.EXP2: settings.bench.replicates_exp2,
    }.get(experiment, settings.bench.replicates_other)


def simulate_config(args, settings: Settings) -> RunConfig:
    experiment = Experiment(args.experiment)
    spec = ScenarioSpec.default(experiment, args.scenario, seed=args.base_seed, n=args.n)
    K = args.K if args.K is not None else (None if args.K_set else DEFAULT_K[experiment.value])
    return RunConfig(
        scenario=spec, methods=tuple(args.methods), replicates=_replicates(args, settings, experiment),
        K=K, K_set=tuple(args.K_set) if args.K_set else None, base_seed=args.base_seed,
        output_dir=args.output_dir or settings.bench.output_dir,
        families=_families(args, settings, experiment.value),
        variant=args.variant or settings.search.variant, sparse_t=args.sparse_t,
        timing=args.timing, n_jobs=args.n_jobs,
        em=settings.em, search=settings.search, sparse=settings.sparse,
    )


def fit_config(args, settings: Settings) -> RunConfig:
    return RunConfig(
        csv_path=args.CSV, methods=tuple(args.methods), replicates=1,
        K=args.K, K_set=tuple(args.K_set) if args.K_set else None, base_seed=args.seed,
        output_dir=args.output_dir or settings.bench.output_dir,
        families=_families(args, settings, 'csv'),
        variant=args.variant or settings.search.variant, sparse_t=args.sparse_t,
        timing=args.timing, n_jobs=1,
        em=settings.em, search=settings.search, sparse=settings.sparse,
    )


def _cell(mean: float, sd: float, digits: int) -> str:
    if np.isnan(mean):
        return '-'
    if np.isnan(sd):
        return f"{mean:.{digits}f}"
    return f"{mean:.{digits}f} ({sd:.{digits}f})"


def print_summary(result: BenchmarkResult):
    """Mean (sd) per method and metric, one table per scenario."""
    summary = result.summary
    for scenario, group in summary.groupby('scenario', sort=True):
        table = Table(title=f"📊 {scenario}", header_style="bold #00FFFF", show_lines=False)
        table.add_column("Method", style="bold #FFFF00")
        for metric in METRICS:
            table.add_column(METRIC_TITLES[metric], justify="right")
        for method, rows in group.groupby('method', sort=True):
            cells = []
            for metric in METRICS:
                rec = rows[rows['metric'] == metric].iloc[0]
                cells.append(_cell(rec['mean'], rec['sd'], 1 if metric == 'n_selected' else 0))
            table.add_row(method, *cells)
        console.print(table)
    failures = [row for row in result.rows if row.failed]
    if failures:
        console.print(f"[yellow]⚠️  {len(failures)} method run(s) failed; see the error column of results.csv[/]")


def _variables(indices, names: Sequence[str]) -> str:
    return ', '.join(names[j] for j in sorted(indices)) or '∅'


def print_fit(result: BenchmarkResult, data: DataMatrix):
    names = data.names
    for row in result.rows:
        if row.failed:
            console.print(Panel(row.error, title=f"❌ {row.method}", border_style="red"))
            continue
        lines = [f"clusters: {np.bincount(row.labels).tolist()}"]
        if row.ari is not None:
            lines.append(f"ARI vs label column: {row.ari:.2f}")
        if row.roles is not None:
            roles = row.roles
            lines += [f"S (relevant):    {_variables(roles.S, names)}",
                      f"R (predictors):  {_variables(roles.R, names)}",
                      f"U (redundant):   {_variables(roles.U, names)}",
                      f"W (independent): {_variables(roles.W, names)}"]
        console.print(Panel('\n'.join(lines), title=f"✅ {row.method}", border_style="green"))
        if row.weights is not None:
            table = Table(title=f"weights (t = {row.t:.3f})", header_style="bold #00FFFF")
            table.add_column("Variable", style="bold #FFFF00")
            table.add_column("w", justify="right")
            for name, w in zip(names, row.weights):
                table.add_row(name, f"{w:.4f}" if w > 0 else "[dim]0[/]")
            console.print(table)
        if row.detail:
            jprint({k: (float(v) if isinstance(v, (np.floating, float)) else v) for k, v in row.detail.items()})


def cmd_simulate(args, settings: Settings) -> int:
    config = simulate_config(args, settings)
    console.print(f"[bold #00AAFF]🚀 {config.id}[/]: {config.replicates} replicate(s), "
                  f"methods {', '.join(config.methods)}, seeds {config.base_seed}..{config.base_seed + config.replicates - 1}")
    result = run_benchmark(config)
    files = write_outputs(result)
    print_summary(result)
    console.print(f"[green]💾 {', '.join(str(p) for p in files.values())}[/]")
    return 0


def cmd_fit(args, settings: Settings) -> int:
    config = fit_config(args, settings)
    data, _ = load_csv(args.CSV)
    result = run_benchmark(config)
    print_fit(result, data)
    if args.output_dir:
        write_outputs(result)
    if args.labels_out:
        frame = data.to_frame()[[]]
        for row in result.rows:
            if not row.failed:
                frame[row.method] = row.labels + 1
        Path(args.labels_out).parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(args.labels_out, index=False)
        console.print(f"[green]💾 {args.labels_out}[/]")
    return 0


def cmd_tune(args, settings: Settings) -> int:
    if (args.CSV is None) == (args.experiment is None):
        raise ConfigInvalid("give either a CSV file or --experiment")
    if args.CSV is not None:
        data, _ = load_csv(args.CSV)
        name = Path(args.CSV).stem
        K = args.K
    else:
        spec = ScenarioSpec.default(args.experiment, args.scenario, seed=args.seed)
        data = generate(spec).data
        name = spec.id
        K = args.K if args.K is not None else DEFAULT_K[spec.experiment.value]
    if K is None:
        raise ConfigInvalid("tune needs --K")
    sparse = settings.sparse
    if args.n_t is not None:
        sparse = replace(sparse, n_t=args.n_t)
    n_perm = sparse.n_perm if args.n_perm is None else args.n_perm
    if K < 2:
        raise ConfigInvalid(f"tune needs --K >= 2, got {K}")
    if n_perm < 2:
        raise ConfigInvalid(f"tune needs --n-perm >= 2, got {n_perm}")
    if sparse.n_t < 1:
        raise ConfigInvalid(f"tune needs --n-t >= 1, got {sparse.n_t}")
    curve = tune_t(data, K, n_perm=n_perm, rng_seed=args.seed, config=sparse, n_jobs=args.n_jobs)

    table = Table(title=f"📈 gap curve ({name}, K={K})", header_style="bold #00FFFF")
    for col in ("t", "gap", "se", "objective"):
        table.add_column(col, justify="right")
    for t, g, s, o in zip(curve.t_grid, curve.gap, curve.se, curve.objectives):
        style = "bold green" if t == curve.chosen_t else None
        table.add_row(f"{t:.4f}", f"{g:.4f}", f"{s:.4f}", f"{o:.2f}", style=style)
    console.print(table)
    console.print(f"✅ chosen t = [bold]{curve.chosen_t:.4f}[/]")

    out = Path(args.output_dir or settings.bench.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / 'gap.csv'
    curve.to_frame()[['t', 'gap', 'se', 'chosen']].to_csv(path, index=False, float_format='%.10g')
    console.print(f"[green]💾 {path}[/]")
    return 0


def _fail(message: str, code: int) -> int:
    console.print(f"❌ {message}", style="red", markup=False)
    if traceback_enabled():
        console.print_exception()
    return code


COMMANDS = {'simulate': cmd_simulate, 'fit': cmd_fit, 'tune': cmd_tune}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse the command line and dispatch; returns the process exit code."""
    rich_traceback.install(theme='fruity', max_frames=30, show_locals=False)
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv:
        parser.print_help()
        return 0
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help()
        return 0

    start_time = time.time()
    try:
        settings = load_config(args.config)
        return COMMANDS[args.command](args, settings)
    except ConfigInvalid as e:
        return _fail(f"Configuration error: {e}", 2)
    except DataLoadError as e:
        return _fail(f"Data error: {e}", 3)
    except VarselError as e:
        return _fail(f"{type(e).__name__}: {e}", 1)
    except KeyboardInterrupt:
        console.print("\n[yellow]👋 Interrupted by user[/]")
        return 130
    finally:
        console.print(f"[dim]⏱️  Execution time: {time.time() - start_time:.3f}s[/]")


if __name__ == "__main__":
    sys.exit(main())
