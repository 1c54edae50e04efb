"""Command-line interface: shadow, verify, audit and hull"""

import argparse
import csv
import logging
import math
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .batch import BatchVerifier
from .config import load_run_config, load_set_document
from .core import ShadowrecError
from .recurrence import generate_pseudo_orbit
from .reports import Report, audit_summary, write_audit_csv, write_hull_csv, write_json
from .sets import contains, gauge, symmetric_convex_hull
from .shadowing import AUDIT_BOUND_FACTOR, construct_shadow, remark_audit


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_INTERRUPTED = 130


class CLIError(Exception):
    """Custom exception for CLI-specific errors"""
    pass


def setup_logging(verbose: bool = False) -> None:
    """
    Setup logging configuration

    Args:
        verbose: Enable debug logging if True
    """
    level = logging.DEBUG if verbose else logging.WARNING
    logging.basicConfig(
        level=level,
        format='%(levelname)s: %(message)s',
        stream=sys.stderr
    )


def create_parser() -> argparse.ArgumentParser:
    """
    Create command-line argument parser

    Returns:
        Configured argument parser
    """
    parser = argparse.ArgumentParser(
        prog='shadowrec',
        description='shadowrec - exact shadows of perturbed linear recurrences',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Shadow one pseudo-orbit and write shadow.csv + summary.json
  %(prog)s shadow --config run.json --out results/

  # Check the guarantees on 100 random instances of the configured regime
  %(prog)s verify --config run.json --trials 100

  # Distances to the exact orbits of x_{n+1} = r x_n + 1
  %(prog)s audit --r 1.5 --grid=-10:10:0.1 --horizon 60

  # Membership of query points in the symmetric convex hull of a set
  %(prog)s hull --set cross.json --queries points.csv

Exit codes:
  0 success, 1 guarantee failure or unexpected error,
  2 invalid configuration or unmet hypothesis, 130 interrupted
        """
    )

    parser.add_argument(
        '--version',
        action='version',
        version=f'%(prog)s {__version__}'
    )

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        '-v', '--verbose',
        action='store_true',
        help='Enable verbose output'
    )

    subparsers = parser.add_subparsers(dest='command', metavar='COMMAND')
    subparsers.required = True

    shadow = subparsers.add_parser(
        'shadow', parents=[common], help='Construct the shadow of one pseudo-orbit'
    )
    shadow.add_argument('--config', required=True, help='Run configuration (JSON)')
    shadow.add_argument('--out', required=True, help='Output directory')

    verify = subparsers.add_parser(
        'verify', parents=[common], help='Check the guarantees on random instances'
    )
    verify.add_argument('--config', required=True, help='Run configuration (JSON)')
    verify.add_argument('--trials', type=int, default=100, help='Number of random instances (default: 100)')
    verify.add_argument('--workers', type=int, default=4, help='Concurrent trials (default: 4)')
    verify.add_argument('--out', help='Directory for verify.json (default: no file)')

    audit = subparsers.add_parser(
        'audit', parents=[common], help='Audit x_{n+1} = r x_n + 1 against the exact orbits'
    )
    audit.add_argument('--r', type=float, required=True, help='Coefficient r in [1, 2)')
    audit.add_argument(
        '--grid', required=True,
        help='Starting values y_0 as lo:hi:step (use --grid=-10:10:0.1 when lo is negative)'
    )
    audit.add_argument('--horizon', type=int, required=True, help='Last index N (at most 1000)')
    audit.add_argument(
        '--bound-factor', type=float, default=AUDIT_BOUND_FACTOR,
        help=f'Multiple of r/(r-1) a bounded start may reach (default: {AUDIT_BOUND_FACTOR:g})'
    )
    audit.add_argument('--out', help='Directory for audit.csv and audit.json (default: CSV to stdout)')

    hull = subparsers.add_parser(
        'hull', parents=[common], help='Test query points against conv(V u -V)'
    )
    hull.add_argument('--set', required=True, help='Perturbation set file (JSON)')
    hull.add_argument('--queries', required=True, help='Query points, one comma-separated row each')
    hull.add_argument('--tol', type=float, default=0.0, help='Membership tolerance (default: 0)')
    hull.add_argument('--out', help='Directory for hull.csv (default: stdout)')

    return parser


def parse_grid(text: str) -> Tuple[float, float, float]:
    """
    Parse ``lo:hi:step``

    Raises:
        CLIError: If the grid is malformed
    """
    parts = text.split(':')
    if len(parts) != 3:
        raise CLIError(f"Grid must be written lo:hi:step, got {text!r}")
    try:
        lo, hi, step = (float(p) for p in parts)
    except ValueError:
        raise CLIError(f"Grid bounds must be numbers, got {text!r}")
    if not step > 0.0 or hi < lo:
        raise CLIError(f"Invalid grid {text!r}: need lo <= hi and step > 0")
    return lo, hi, step


def read_queries(path: Path, dimension: int) -> List[Tuple[int, np.ndarray]]:
    """
    Read query points, one comma-separated row each

    Blank rows and rows starting with ``#`` are skipped.

    Returns:
        (row number, vector) pairs

    Raises:
        CLIError: If a row does not parse as a vector of the set's dimension
    """
    try:
        with open(path, 'r', encoding='utf-8', newline='') as f:
            rows = list(csv.reader(f))
    except FileNotFoundError:
        raise CLIError(f"Queries file not found: {path}")
    except UnicodeDecodeError:
        raise CLIError(
            f"Unable to decode queries as UTF-8: {path}\n"
            f"Please ensure the file is saved with UTF-8 encoding"
        )

    queries = []
    for row_number, row in enumerate(rows, 1):
        cells = [cell.strip() for cell in row]
        if not any(cells) or cells[0].startswith('#'):
            continue
        if len(cells) != dimension:
            raise CLIError(
                f"Queries row {row_number}: expected {dimension} components, got {len(cells)}"
            )
        try:
            vec = np.array([float(cell) for cell in cells])
        except ValueError:
            raise CLIError(f"Queries row {row_number}: components must be numbers, got {row!r}")
        if not np.all(np.isfinite(vec)):
            raise CLIError(f"Queries row {row_number}: components must be finite")
        queries.append((row_number, vec))

    logger.debug(f"Read {len(queries)} queries from {path}")
    return queries


def handle_shadow(args: argparse.Namespace) -> int:
    """
    Handle the shadow command

    Returns:
        0 when every guaranteed containment holds, 1 otherwise
    """
    config = load_run_config(Path(args.config))

    pseudo_orbit = generate_pseudo_orbit(
        config.x0,  # type: ignore[arg-type]
        config.coefficients,
        config.forcing,  # type: ignore[arg-type]
        config.perturbation,
        config.horizon,
        config.sampler,
        config.seed
    )
    result = construct_shadow(
        pseudo_orbit, config.seminorms, q_override=config.q, tol=config.tolerance  # type: ignore[arg-type]
    )

    report = Report.from_result(result, config.seminorms, config.to_dict())
    csv_path, summary_path = report.write(Path(args.out), config.output.csv, config.output.summary)
    print(f"✓ Table saved to: {csv_path}", file=sys.stderr)
    print(f"✓ Summary saved to: {summary_path}", file=sys.stderr)

    if not report.verdict:
        shown = ", ".join(str(n) for n in report.failures[:10])
        print(
            f"⚠️  {len(report.failures)} guaranteed containments fail (n = {shown})",
            file=sys.stderr
        )
        return EXIT_FAILURE

    print(
        f"✓ {report.variant}: all containments from n0 = {report.n0} hold "
        f"(constant {report.stability_constant:.6g})",
        file=sys.stderr
    )
    return EXIT_OK


def handle_verify(args: argparse.Namespace) -> int:
    """
    Handle the verify command

    Returns:
        0 when every trial passes, 1 otherwise
    """
    if args.workers < 1:
        raise CLIError(f"--workers must be at least 1, got {args.workers}")

    config = load_run_config(Path(args.config))
    verifier = BatchVerifier(config, max_workers=args.workers)

    if args.trials > 100:
        print(f"Verifying {args.trials:,} random {verifier.regime.value} instances...", file=sys.stderr)

    outcome = verifier.run(args.trials)
    stats = outcome['statistics']

    print(f"Regime: {verifier.regime.value}")
    print(f"Trials: {stats['trials']}")
    print(f"Passed: {stats['passed']}")
    print(f"Failed: {stats['failed']}")
    print(f"Worst utilization: {stats['worst_utilization']:.6f} (trial {stats['worst_trial']})")
    print(f"Duration: {outcome['duration']:.2f}s")

    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / 'verify.json'
        write_json(path, {
            'regime': verifier.regime.value,
            'statistics': {k: v for k, v in stats.items() if k not in ('start_time', 'end_time')},
            'results': {str(trial): result for trial, result in outcome['results'].items()},
        })
        print(f"✓ Results saved to: {path}", file=sys.stderr)

    if stats['failed']:
        print(f"⚠️  {stats['failed']} of {stats['trials']} trials failed", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


def handle_audit(args: argparse.Namespace) -> int:
    """
    Handle the audit command

    Returns:
        Exit code
    """
    grid = parse_grid(args.grid)
    audit = remark_audit(args.r, grid, args.horizon, args.bound_factor)

    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = out_dir / 'audit.csv'
        with open(csv_path, 'w', encoding='utf-8', newline='') as f:
            write_audit_csv(audit, f)
        write_json(out_dir / 'audit.json', audit_summary(audit))
        print(f"✓ Audit saved to: {csv_path}", file=sys.stderr)
    else:
        write_audit_csv(audit, sys.stdout)

    print(f"Minimum sup distance over the grid: {audit.min_sup:.6g}", file=sys.stderr)
    if audit.divergent_case:
        print("r = 1: no exact orbit stays within bounded distance", file=sys.stderr)
    elif audit.contradicts_remark:
        print(
            f"⚠️  Bounded shadow y_0 = {audit.predicted_y0:.6g} found "
            f"(sup distance {audit.candidate.sup:.6g})",  # type: ignore[union-attr]
            file=sys.stderr
        )
    return EXIT_OK


def handle_hull(args: argparse.Namespace) -> int:
    """
    Handle the hull command

    Returns:
        Exit code
    """
    if not (math.isfinite(args.tol) and args.tol >= 0.0):
        raise CLIError(f"--tol must be a nonnegative number, got {args.tol}")

    bound_set = load_set_document(Path(args.set))
    hull = symmetric_convex_hull(bound_set)
    queries = read_queries(Path(args.queries), hull.dimension)
    verdicts = [
        (row, vec, contains(hull, vec, args.tol), gauge(hull, vec))
        for row, vec in queries
    ]

    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / 'hull.csv'
        with open(path, 'w', encoding='utf-8', newline='') as f:
            write_hull_csv(hull.dimension, verdicts, f)
        print(f"✓ Verdicts saved to: {path}", file=sys.stderr)
    else:
        write_hull_csv(hull.dimension, verdicts, sys.stdout)

    inside = sum(1 for _, _, contained, _ in verdicts if contained)
    logger.info(f"{inside} of {len(verdicts)} queries inside the {hull.kind.value} hull")
    return EXIT_OK


HANDLERS: Dict[str, Callable[[argparse.Namespace], int]] = {
    'shadow': handle_shadow,
    'verify': handle_verify,
    'audit': handle_audit,
    'hull': handle_hull,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Main entry point

    Args:
        argv: Arguments (default: sys.argv[1:])

    Returns:
        Exit code (0 success, 1 guarantee failure or unexpected error,
        2 configuration or hypothesis error, 130 interrupted)
    """
    parser = create_parser()
    args = parser.parse_args(argv)

    setup_logging(args.verbose)

    try:
        return HANDLERS[args.command](args)

    except KeyboardInterrupt:
        print("\n⚠️  Interrupted by user", file=sys.stderr)
        return EXIT_INTERRUPTED
    except (CLIError, ShadowrecError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:
        logger.exception("Unexpected error occurred")
        print(f"Error: An unexpected error occurred: {e}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
