"""Brute-force references the distributed engine is checked against.

None of these reuse the engine's reduction, exchange or solver code.
"""
import warnings

import numpy as np
import scipy.linalg

from .assembly import ProblemData, generate_problem
from .errors import CoverageViolationError, InvalidConfigurationError, RankDeficiencyError
from .sym_assign import assigned_columns

MAX_COVERAGE_N = 512
RANK_DEFICIENCY_RCOND = 1e-14


def build_full_matrix(spec):
    """Diagonal and upper triangle summed datum by datum, then copied to the lower"""
    n = spec.n
    upper = np.zeros((n, n))
    rhs = np.zeros(n)
    for datum in generate_problem(spec):
        g = datum.design_row
        upper += datum.weight * np.triu(np.outer(g, g))
        rhs += datum.weight * (g * datum.observation)
    return np.triu(upper) + np.triu(upper, 1).T, rhs


def build_by_data_decomposition(spec, ranks):
    """The previous scheme: every rank builds the whole triangle for its share of the data.

    Partial matrices are reduced onto rank 0 in rank order.
    """
    data = ProblemData.from_contributions(generate_problem(spec))
    bounds = np.linspace(0, len(data), ranks + 1).astype(int)
    partials = []
    for start, stop in zip(bounds[:-1], bounds[1:]):
        upper = np.zeros((spec.n, spec.n))
        rhs = np.zeros(spec.n)
        for k in range(start, stop):
            g, w, b = data.design[k], data.weights[k], data.observations[k]
            upper += w * np.triu(np.outer(g, g))
            rhs += w * (g * b)
        partials.append((upper, rhs))
    upper = sum(m for m, _ in partials)
    rhs = sum(r for _, r in partials)
    return np.triu(upper) + np.triu(upper, 1).T, rhs


def naive_cell_counts(p):
    """Cells per rank when each rank computes only the diagonal and upper part of its rows"""
    return [sum(p.n - row for row in p.rows_of(k)) for k in range(p.ranks)]


def dense_solve(A, b):
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    try:
        with warnings.catch_warnings():
            # an exactly zero pivot is reported through rcond below
            warnings.simplefilter('ignore', scipy.linalg.LinAlgWarning)
            lu, piv = scipy.linalg.lu_factor(A)
        rcond, _ = scipy.linalg.lapack.dgecon(lu, np.linalg.norm(A, 1), norm='1')
    except ValueError:
        rcond = 0.0
    if not rcond > RANK_DEFICIENCY_RCOND:
        raise RankDeficiencyError(f'matrix is singular to working precision (rcond={rcond:.3e})')
    return scipy.linalg.lu_solve((lu, piv), b)


def enumerate_coverage(n):
    """Map each unordered pair (i <= j) to the single cell (row, col) computing it"""
    if n < 1 or n > MAX_COVERAGE_N:
        raise InvalidConfigurationError(f'coverage enumeration supports 1 <= n <= {MAX_COVERAGE_N}, got {n}')
    covering = {}
    for row in range(n):
        for col in assigned_columns(n, row).columns:
            pair = (min(row, col), max(row, col))
            if pair in covering:
                raise CoverageViolationError(
                    f'pair {pair} computed twice: by cell {covering[pair]} and by cell {(row, col)}', pair)
            covering[pair] = (row, col)
    for i in range(n):
        for j in range(i, n):
            if (i, j) not in covering:
                raise CoverageViolationError(f'pair {(i, j)} is never computed', (i, j))
    return covering
