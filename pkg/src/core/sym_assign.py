"""Balanced assignment of symmetric matrix cells to rows.

Every row starts at its diagonal and walks right, wrapping into the lower
triangle, for a quota of cells. Quotas alternate between ceil and floor of
(n+1)/2 so that each unordered pair {i, j} is computed by exactly one row.
"""
import logging
import math
from collections import namedtuple
from fractions import Fraction

import numpy as np

from .errors import InvalidConfigurationError, RowIndexError
from .partition import owner_of_row

logger = logging.getLogger('SymAssign')

CellAssignment = namedtuple('CellAssignment', ['row', 'columns'])


class CellQuota:
    def __init__(self, n, f, r, per_row):
        self.n = n
        self.f = f
        self.r = r
        self.per_row = list(per_row)

    def __getitem__(self, row):
        return self.per_row[row]

    def __len__(self):
        return len(self.per_row)


def _check_dimension(n):
    if n < 1:
        raise InvalidConfigurationError(f'matrix dimension must be at least 1, got {n}')


def global_cell_count(n):
    _check_dimension(n)
    return n * (n + 1) // 2


def base_per_row(n):
    return Fraction(global_cell_count(n), n)


def _row_quota(n, row):
    # Only depends on (n, row): ranks never need to agree on anything.
    r = base_per_row(n)
    if r.denominator == 1:
        return int(r)
    take_ceil = row % 2 == 0
    half = n // 2
    if half % 2 == 0 and row >= half:
        take_ceil = not take_ceil
    return math.ceil(r) if take_ceil else math.floor(r)


def row_quotas(n):
    f = global_cell_count(n)
    return CellQuota(n, f, base_per_row(n), [_row_quota(n, row) for row in range(n)])


def assigned_columns(n, row):
    _check_dimension(n)
    if row < 0 or row >= n:
        raise RowIndexError(f'row {row} outside [0, {n})')
    quota = _row_quota(n, row)
    return CellAssignment(row, [(row + k) % n for k in range(quota)])


def rank_assignments(p, rank):
    """Assignments for the rows a single rank owns, computed without any peer"""
    return [assigned_columns(p.n, row) for row in p.rows_of(rank)]


def rank_cell_count(p, rank):
    return sum(len(a.columns) for a in rank_assignments(p, rank))


def verify_exact_coverage(n):
    _check_dimension(n)
    hits = np.zeros((n, n), dtype=np.int64)
    for row in range(n):
        for col in assigned_columns(n, row).columns:
            hits[row, col] += 1
    # Fold each cell onto its unordered pair; the diagonal must be hit once too.
    pair_hits = np.triu(hits + hits.T)
    np.fill_diagonal(pair_hits, np.diag(hits))
    upper = pair_hits[np.triu_indices(n)]
    ok = bool(np.all(upper == 1))
    if not ok:
        logger.warning(f'coverage check failed for n={n}')
    return ok


def render_grid(n, p=None):
    """Text grid of explicitly computed cells.

    Without a partition computed cells are marked 'X'; with one they carry the
    computing rank's id (mod 36). Uncomputed cells are '.'.
    """
    symbols = '0123456789abcdefghijklmnopqrstuvwxyz'
    lines = []
    for row in range(n):
        cells = ['.'] * n
        mark = 'X' if p is None else symbols[owner_of_row(p, row) % len(symbols)]
        for col in assigned_columns(n, row).columns:
            cells[col] = mark
        lines.append(' '.join(cells))
    return '\n'.join(lines)
