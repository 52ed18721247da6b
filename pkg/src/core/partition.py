import bisect
from .errors import InvalidConfigurationError, RowIndexError


class RowPartition:
    """Contiguous row blocks of an n x n matrix spread over ranks.

    The first (n mod ranks) ranks own one extra row, so block sizes never
    differ by more than one.
    """

    def __init__(self, n, ranks, starts, ends):
        self.n = n
        self.ranks = ranks
        self.starts = tuple(starts)
        self.ends = tuple(ends)

    def rows_of(self, rank):
        """Global rows owned by a rank"""
        return range(self.starts[rank], self.ends[rank])

    def block_size(self, rank):
        return self.ends[rank] - self.starts[rank]

    def block_sizes(self):
        return [self.block_size(k) for k in range(self.ranks)]

    def __eq__(self, other):
        if not isinstance(other, RowPartition):
            return NotImplemented
        return (self.n, self.starts, self.ends) == (other.n, other.starts, other.ends)

    def __repr__(self):
        return f'RowPartition(n={self.n}, ranks={self.ranks}, sizes={self.block_sizes()})'


def partition_rows(n, ranks):
    if n < 1:
        raise InvalidConfigurationError(f'matrix dimension must be at least 1, got {n}')
    if ranks < 1 or ranks > n:
        raise InvalidConfigurationError(f'rank count must lie in [1, {n}], got {ranks}')

    base, extra = divmod(n, ranks)
    starts, ends = [], []
    row = 0
    for k in range(ranks):
        starts.append(row)
        row += base + (1 if k < extra else 0)
        ends.append(row)
    return RowPartition(n, ranks, starts, ends)


def owner_of_row(p, row):
    if row < 0 or row >= p.n:
        raise RowIndexError(f'row {row} outside [0, {p.n})')
    return bisect.bisect_right(p.starts, row) - 1
