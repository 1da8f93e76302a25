#evaluate_benchmarks.py
import argparse
import logging
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from config import (DUMBBELL_SCALED, EVALUATION_PATH, LOG_FORMAT, MASS_TOLERANCE,
                    PROBLEM_DEFAULTS, PROBLEM_NAMES, REFERENCE_VALUES)
from fpe_solver import SolverError, solve
from models import benchmark
from utils import records, rss_mb, save_json

logger = logging.getLogger("evaluate_benchmarks")


def check_targets(name, last, scaled=False):
    """Compare the final report row of a run with its published targets"""
    ref = REFERENCE_VALUES[name]
    checks = {}

    if 'err_analytic' in ref:
        checks['err_analytic'] = last['err_analytic'] <= ref['err_analytic']
    if 'err_stationary' in ref:
        checks['err_stationary'] = last['err_stationary'] <= ref['err_stationary']
    if 'erank_final' in ref:
        lo, hi = ref['erank_final']
        checks['erank_final'] = lo <= last['erank'] <= hi
    if 'psi' in ref:
        tol = ref['tolerance_scaled'] if scaled else ref['tolerance']
        checks['psi'] = abs(last['psi'] - ref['psi']) <= tol
        checks['eta'] = abs(last['eta'] - ref['eta']) <= tol

    checks['mass'] = abs(1.0 - last['mass']) <= MASS_TOLERANCE
    return checks


def evaluate_problem(name, scaled=False):
    """Run one benchmark with its default settings"""
    defaults = dict(PROBLEM_DEFAULTS[name])
    if scaled and name == 'dumbbell':
        defaults.update(DUMBBELL_SCALED)
        logger.warning("Dumbbell runs on the scaled grid N=%d instead of N=%d",
                       defaults['grid_points'], PROBLEM_DEFAULTS[name]['grid_points'])

    problem, observers = benchmark(name)
    sizes = [defaults['grid_points']] * defaults['dim']

    start = time.perf_counter()
    try:
        _, report = solve(problem, sizes, defaults['time_points'], defaults['eps'],
                          observers=observers)
        error = None
    except SolverError as e:
        report = e.report
        error = str(e)
    elapsed = time.perf_counter() - start

    frame = report.to_frame()
    result = {
        'problem': name,
        'scaled': bool(scaled and name == 'dumbbell'),
        'grid_points': defaults['grid_points'],
        'time_points': defaults['time_points'],
        'eps': defaults['eps'],
        'seconds': elapsed,
        'rss_mb': rss_mb(),
        'error': error,
        'max_erank': float(frame['erank'].max()) if len(frame) else None,
        'non_converged_steps': report.non_converged,
        'final': records(frame.tail(1))[0] if len(frame) else {},
    }
    if error is None:
        result['checks'] = check_targets(name, report.last, result['scaled'])
        if 'erank_max' in REFERENCE_VALUES[name]:
            result['checks']['erank_max'] = result['max_erank'] <= REFERENCE_VALUES[name]['erank_max']
        result['passed'] = all(result['checks'].values())
    else:
        result['checks'] = {}
        result['passed'] = False
    return result


def main():
    parser = argparse.ArgumentParser(description="Reproduce the benchmark runs")
    parser.add_argument('--problems', nargs='+', choices=PROBLEM_NAMES, default=list(PROBLEM_NAMES))
    parser.add_argument('--scaled', action='store_true', help="dumbbell on the reduced grid")
    parser.add_argument('--output', type=Path, default=EVALUATION_PATH)
    parser.add_argument('--verbose', action='store_true')
    args = parser.parse_args()

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format=LOG_FORMAT)

    print("=" * 80)
    print("EVALUASI BENCHMARK FOKKER-PLANCK (TT)")
    print("=" * 80)
    print(f"\nMenjalankan {len(args.problems)} benchmark...")
    print("-" * 80)

    results = []
    for i, name in enumerate(args.problems, 1):
        print(f"[{i}/{len(args.problems)}] {name:10s} ", end="", flush=True)
        result = evaluate_problem(name, args.scaled)
        results.append(result)

        if result['error']:
            print(f"[ERROR] {result['error']}")
            continue
        tag = "[OK]" if result['passed'] else "[FAIL]"
        final = result['final']
        print(f"{tag} t={final['t']:.2f} erank={final['erank']:.2f} "
              f"mass={final['mass']:.6f} ({result['seconds']:.1f}s)")

    summary = {
        'passed': sum(r['passed'] for r in results),
        'total': len(results),
        'total_seconds': sum(r['seconds'] for r in results),
    }
    save_json({'summary': summary, 'per_problem_results': results}, args.output)

    print("\n" + "=" * 80)
    print("HASIL EVALUASI")
    print("=" * 80)
    for r in results:
        print(f"\n{r['problem']} (N={r['grid_points']}, M={r['time_points']}, eps={r['eps']:g}):")
        for key, value in r['final'].items():
            if key != 'step' and value is not None:
                print(f"  {key:16s} {value:.6g}")
        for key, ok in r['checks'].items():
            print(f"  {'[OK]' if ok else '[FAIL]'} {key}")

    failed = [r for r in results if not r['passed']]
    if failed:
        print(f"\n{len(failed)} benchmark perlu perhatian:")
        for r in failed:
            print(f"  • {r['problem']}")

    print(f"\n✓ Hasil disimpan ke: {args.output}")
    print("=" * 80 + "\n")
    return 0 if not failed else 1


if __name__ == "__main__":
    sys.exit(main())
