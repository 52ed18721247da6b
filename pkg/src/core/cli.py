import argparse
import configparser
import logging
import os

from .engine import Engine
from .errors import EngineError
from .report import RunReport

DEFAULT_CONFIG = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'config', 'config.ini')

# flag destination -> (section, option)
OVERRIDES = {
    'n': ('PROBLEM', 'N'),
    'data': ('PROBLEM', 'DATA'),
    'seed': ('PROBLEM', 'SEED'),
    'weight_scale': ('PROBLEM', 'WEIGHT_SCALE'),
    'ranks': ('ASSEMBLY', 'RANKS'),
    'threads': ('ASSEMBLY', 'THREADS'),
    'deterministic_reduction': ('ASSEMBLY', 'DETERMINISTIC_REDUCTION'),
    'concurrent_ranks': ('ASSEMBLY', 'CONCURRENT_RANKS'),
    'solver': ('SOLVER', 'METHOD'),
    'threshold': ('SOLVER', 'THRESHOLD'),
    'requested_pairs': ('SOLVER', 'REQUESTED_PAIRS'),
    'tol': ('ITERATIVE', 'TOLERANCE'),
    'max_iterations': ('ITERATIVE', 'MAX_ITERATIONS'),
    'preconditioner': ('ITERATIVE', 'PRECONDITIONER'),
    'krylov': ('ITERATIVE', 'KRYLOV'),
    'prefetch_distance': ('KERNEL', 'PREFETCH_DISTANCE'),
    'kernel_size': ('KERNEL', 'SIZE'),
    'repetitions': ('KERNEL', 'REPETITIONS'),
    'log_level': ('REPORT', 'LOG_LEVEL'),
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog='normal-equations',
        description='Build synthetic normal equations over simulated ranks and solve them.')
    parser.add_argument('--config', default=DEFAULT_CONFIG, help='INI file with defaults')
    parser.add_argument('--n', type=int, help='number of model coefficients (matrix dimension)')
    parser.add_argument('--data', type=int, help='number of input data points')
    parser.add_argument('--seed', type=int)
    parser.add_argument('--weight-scale', type=float)
    parser.add_argument('--ranks', type=int, help='simulated ranks owning row blocks')
    parser.add_argument('--threads', type=int, help='threads per rank during the build')
    parser.add_argument('--deterministic-reduction', action=argparse.BooleanOptionalAction, default=None,
                        help='reduce thread contributions in data order')
    parser.add_argument('--concurrent-ranks', action=argparse.BooleanOptionalAction, default=None)
    parser.add_argument('--solver', choices=['direct', 'split', 'iterative'])
    parser.add_argument('--threshold', type=float, help='discard eigenpairs with |lambda| <= threshold')
    parser.add_argument('--requested-pairs', type=int)
    parser.add_argument('--tol', type=float, help='relative tolerance of the iterative solver')
    parser.add_argument('--max-iterations', type=int)
    parser.add_argument('--preconditioner', choices=['none', 'jacobi'])
    parser.add_argument('--krylov', choices=['cg', 'gmres'])
    parser.add_argument('--prefetch-distance', type=int, help='lookahead of the pipelined kernel')
    parser.add_argument('--kernel-size', type=int)
    parser.add_argument('--repetitions', type=int)
    parser.add_argument('--bench-kernel', action='store_true', help='time the irregular-access kernel')
    parser.add_argument('--dump-matrix', metavar='DIR', help='write per-rank triplet dumps and a CSV matrix')
    parser.add_argument('--report', metavar='PATH', help='write the JSON report here instead of stdout')
    parser.add_argument('--tables', metavar='DIR', help='write CSV tables here')
    parser.add_argument('--baseline', metavar='PATH', help='report to compare this run against')
    parser.add_argument('--log-level', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])
    return parser


def load_config(args):
    config = configparser.ConfigParser()
    config.optionxform = str.upper
    if not config.read(args.config):
        raise EngineError(f'could not read configuration file {args.config}')
    for dest, (section, option) in OVERRIDES.items():
        value = getattr(args, dest)
        if value is None:
            continue
        if not config.has_section(section):
            config.add_section(section)
        config.set(section, option, str(value).lower() if isinstance(value, bool) else str(value))
    return config


def usage_problems(args, config):
    """Flag combinations that cannot describe a sensible run"""
    problems = []
    n = config.getint('PROBLEM', 'N')
    ranks = config.getint('ASSEMBLY', 'RANKS')
    method = config.get('SOLVER', 'METHOD')
    if n < 1:
        problems.append('--n must be at least 1')
    if config.getint('PROBLEM', 'DATA') < 1:
        problems.append('--data must be at least 1')
    if not 1 <= ranks <= max(n, 1):
        problems.append(f'--ranks must lie in [1, n={n}]')
    if config.getint('ASSEMBLY', 'THREADS') < 1:
        problems.append('--threads must be at least 1')
    if config.getfloat('SOLVER', 'THRESHOLD') < 0:
        problems.append('--threshold must be non-negative')
    if not 0 <= config.getint('SOLVER', 'REQUESTED_PAIRS') <= n:
        problems.append(f'--requested-pairs must lie in [0, n={n}], 0 meaning all')
    if not 0 < config.getfloat('ITERATIVE', 'TOLERANCE') < 1:
        problems.append('--tol must lie in (0, 1)')
    if args.tol is not None and method != 'iterative':
        problems.append('--tol only applies to --solver iterative')
    if args.threshold is not None and method == 'iterative':
        problems.append('--threshold only applies to the direct and split solvers')
    if args.prefetch_distance is not None and not args.bench_kernel:
        problems.append('--prefetch-distance only applies with --bench-kernel')
    if config.getint('KERNEL', 'PREFETCH_DISTANCE') < 1:
        problems.append('--prefetch-distance must be at least 1')
    return problems


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args)
        problems = usage_problems(args, config)
        baseline = RunReport.load(args.baseline) if args.baseline else None
    except (EngineError, OSError, KeyError, ValueError, configparser.Error) as e:
        parser.error(str(e))
    if problems:
        parser.error('; '.join(problems))

    logging.basicConfig(level=config.get('REPORT', 'LOG_LEVEL', fallback='INFO'))
    logger = logging.getLogger('Main')

    try:
        engine = Engine(config)
        report = engine.run(baseline=baseline, dump_dir=args.dump_matrix,
                            tables_dir=args.tables, bench=args.bench_kernel)
    except EngineError as e:
        logger.error(f'Error occurred: {e}')
        return 1

    if args.report:
        report.write(args.report)
        logger.info(f'report written to {args.report}')
    else:
        print(report.to_json())
    return 0
