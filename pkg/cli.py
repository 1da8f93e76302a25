"""
Command-line driver for the benchmark problems.

    python cli.py solve --problem oup3d --grid 30 --eps 1e-4
    python cli.py --problem dumbbell --config data/configs/dumbbell_scaled.json

Precedence of settings: problem defaults < JSON config file < flags.
Exit codes: 0 success, 1 configuration error, 2 solver failure.
"""

import argparse
import logging
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from config import (BASE_DIR, CONFIGS_DIR, DEFAULT_SEED, LOG_FORMAT, PROBLEM_DEFAULTS, PROBLEM_NAMES,
                    RESULTS_DIR)
from fpe_solver import SolveReport, SolverError, Stepper, solve
from models import benchmark
from tt_core import TTTensor
from utils import get_file_size, load_json, rss_mb, save_json, save_report_csv

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SOLVER = 2

CONFIG_KEYS = {'problem', 'grid_points', 'time_points', 'eps', 't_final', 'seed', 'output'}


@dataclass
class RunConfig:
    problem: str
    grid_points: int
    time_points: int
    eps: float
    t_final: float
    seed: int = DEFAULT_SEED
    output_path: Optional[Path] = None
    verbose: bool = False

    def __post_init__(self):
        if self.problem not in PROBLEM_DEFAULTS:
            raise ValueError(f"Unknown problem '{self.problem}'")
        if self.grid_points < 3:
            raise ValueError(f"grid points must be at least 3, got {self.grid_points}")
        if self.time_points < 2:
            raise ValueError(f"time points must be at least 2, got {self.time_points}")
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if not self.t_final > 0:
            raise ValueError(f"t_final must be positive, got {self.t_final}")
        if self.output_path is None:
            self.output_path = RESULTS_DIR / f"{self.problem}.csv"
        self.output_path = Path(self.output_path)

    @property
    def summary_path(self) -> Path:
        return self.output_path.with_suffix('.json')

    def echo(self) -> Dict[str, Any]:
        data = asdict(self)
        data['output_path'] = str(self.output_path)
        data.pop('verbose')
        return data


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the configuration error code"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="fpe-tt",
        description="Solve Fokker-Planck benchmark problems in the tensor-train format",
    )
    parser.add_argument('--problem', choices=PROBLEM_NAMES, help="benchmark problem")
    parser.add_argument('--grid', '--grid-points', dest='grid_points', type=int,
                        help="Chebyshev points per dimension")
    parser.add_argument('--steps', '--time-points', dest='time_points', type=int,
                        help="number of time points M (M - 1 steps)")
    parser.add_argument('--eps', type=float, help="rounding and cross accuracy")
    parser.add_argument('--t-final', dest='t_final', type=float, help="time horizon")
    parser.add_argument('--seed', type=int, help="seed for the random cross guesses")
    parser.add_argument('--output', type=Path, help="CSV report path (summary goes next to it)")
    parser.add_argument('--config', type=Path, help="JSON file with run settings")
    parser.add_argument('--verbose', action='store_true', help="debug logging")
    return parser


def _config_path(path: Path) -> Path:
    """A config path as given, or the file of that name under data/configs"""
    if not path.exists() and (CONFIGS_DIR / path).exists():
        return CONFIGS_DIR / path
    return path


def parse_args(argv: Optional[Sequence[str]] = None) -> RunConfig:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] == 'solve':
        argv = argv[1:]

    parser = build_parser()
    args = parser.parse_args(argv)

    settings: Dict[str, Any] = {}
    if args.config is not None:
        config_path = _config_path(args.config)
        try:
            settings = load_json(config_path)
        except ValueError as e:
            parser.error(str(e))
        unknown = sorted(set(settings) - CONFIG_KEYS)
        if unknown:
            parser.error(f"unknown key(s) in {config_path}: {', '.join(unknown)}")
        # outputs named in config files are relative to the project, not the shell
        if settings.get('output') is not None and not Path(settings['output']).is_absolute():
            settings['output'] = BASE_DIR / settings['output']

    for key in ('problem', 'grid_points', 'time_points', 'eps', 't_final', 'seed'):
        value = getattr(args, key)
        if value is not None:
            settings[key] = value
    if args.output is not None:
        settings['output'] = args.output

    problem = settings.get('problem')
    if problem is None:
        parser.error("a problem is required (--problem or 'problem' in --config)")
    if problem not in PROBLEM_DEFAULTS:
        parser.error(f"unknown problem '{problem}' (choose from {', '.join(PROBLEM_NAMES)})")

    defaults = PROBLEM_DEFAULTS[problem]
    try:
        return RunConfig(
            problem=problem,
            grid_points=int(settings.get('grid_points', defaults['grid_points'])),
            time_points=int(settings.get('time_points', defaults['time_points'])),
            eps=float(settings.get('eps', defaults['eps'])),
            t_final=float(settings.get('t_final', defaults['t_final'])),
            seed=int(settings.get('seed', DEFAULT_SEED)),
            output_path=settings.get('output'),
            verbose=args.verbose,
        )
    except (TypeError, ValueError) as e:
        parser.error(str(e))


def _memory_observer(samples: List[float]):
    def observe(state: TTTensor, t: float, stepper: Stepper) -> Dict[str, float]:
        samples.append(rss_mb())
        return {}

    return observe


def _last(report: SolveReport, column: str) -> Optional[float]:
    value = report.last.get(column)
    if value is None or not np.isfinite(value):
        return None
    return float(value)


def build_summary(config: RunConfig, report: SolveReport, total_seconds: float,
                  peak_rss: float) -> Dict[str, Any]:
    final_error = _last(report, 'err_analytic')
    if final_error is None:
        final_error = _last(report, 'err_stationary')
    return {
        'final_error': final_error,
        'final_erank': _last(report, 'erank'),
        'total_seconds': total_seconds,
        'steps': len(report),
        'err_analytic': _last(report, 'err_analytic'),
        'err_stationary': _last(report, 'err_stationary'),
        'psi': _last(report, 'psi'),
        'eta': _last(report, 'eta'),
        'mass': _last(report, 'mass'),
        'min_nodal': _last(report, 'min_nodal'),
        'non_converged_steps': report.non_converged,
        'peak_rss_mb': peak_rss,
        'config': config.echo(),
    }


def run(config: RunConfig) -> int:
    print("=" * 80)
    print(f"FOKKER-PLANCK SOLVE: {config.problem}")
    print("=" * 80)

    problem, observers = benchmark(config.problem, config.t_final)
    sizes = [config.grid_points] * problem.dim
    rss_samples = [rss_mb()]
    observers = list(observers) + [_memory_observer(rss_samples)]

    print(f"  grid {sizes}, M = {config.time_points}, eps = {config.eps:g}, "
          f"t_final = {config.t_final:g}, seed = {config.seed}")

    start = time.perf_counter()
    status = EXIT_OK
    try:
        _, report = solve(problem, sizes, config.time_points, config.eps,
                          observers=observers, seed=config.seed)
    except SolverError as e:
        logger.error("Solver failed: %s", e)
        print(f"[ERROR] {e}")
        report = e.report
        status = EXIT_SOLVER
    total = time.perf_counter() - start

    csv_path = save_report_csv(report.to_frame(), config.output_path)
    summary = build_summary(config, report, total, max(rss_samples))
    json_path = save_json(summary, config.summary_path)

    if status == EXIT_OK:
        print(f"\n[OK] {len(report)} steps in {total:.2f}s")
    for key in ('final_error', 'final_erank', 'psi', 'eta', 'mass'):
        if summary[key] is not None:
            print(f"  {key:16s} {summary[key]:.6g}")
    print(f"  peak RSS         {summary['peak_rss_mb']:.1f} MB")
    print(f"\n  Report:  {csv_path} ({get_file_size(csv_path)})")
    print(f"  Summary: {json_path}")
    print("=" * 80 + "\n")
    return status


def main(argv: Optional[Sequence[str]] = None) -> int:
    config = parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if config.verbose else logging.INFO,
                        format=LOG_FORMAT)
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
