"""Distributed build of the normal-equations matrix and right-hand side.

Each rank owns a contiguous block of rows. It explicitly computes only the
cells the balanced assignment gives it, copies mirrors it holds itself, and
ships the rest to their owners as packed triplets.
"""
import glob
import logging
import os
import threading
from collections import namedtuple

import numpy as np

from .errors import InvalidConfigurationError, ProtocolViolationError
from .partition import owner_of_row, partition_rows
from .performance import PerformanceManager
from .rank_net import RankNetwork, decode, pack, plan_exchange, unpack_apply
from .sym_assign import assigned_columns, rank_assignments

logger = logging.getLogger('Assembly')

DatumContribution = namedtuple('DatumContribution', ['index', 'design_row', 'weight', 'observation'])

# Data rows reduced per batch; bounds the contribution buffer held in memory.
BATCH_SIZE = 256


class ProblemSpec:
    def __init__(self, n, d, seed=0, weight_scale=1.0):
        self.n = n
        self.d = d
        self.seed = seed
        self.weight_scale = weight_scale
        self.validate()

    def validate(self):
        if self.n < 1:
            raise InvalidConfigurationError(f'coefficient count must be at least 1, got {self.n}')
        if self.d < 1:
            raise InvalidConfigurationError(f'data count must be at least 1, got {self.d}')
        if not self.weight_scale > 0:
            raise InvalidConfigurationError(f'weight scale must be positive, got {self.weight_scale}')

    @classmethod
    def from_config(cls, config):
        return cls(
            n=config.getint('PROBLEM', 'N'),
            d=config.getint('PROBLEM', 'DATA'),
            seed=config.getint('PROBLEM', 'SEED', fallback=0),
            weight_scale=config.getfloat('PROBLEM', 'WEIGHT_SCALE', fallback=1.0),
        )

    def as_dict(self):
        return {'n': self.n, 'd': self.d, 'seed': self.seed, 'weight_scale': self.weight_scale}


class ProblemData:
    """Input data stacked into arrays: design (d, n), weights (d,), observations (d,)"""

    def __init__(self, design, weights, observations):
        self.design = np.asarray(design, dtype=np.float64)
        self.weights = np.asarray(weights, dtype=np.float64)
        self.observations = np.asarray(observations, dtype=np.float64)

    @property
    def n(self):
        return self.design.shape[1]

    def __len__(self):
        return self.design.shape[0]

    @classmethod
    def from_contributions(cls, data):
        if isinstance(data, cls):
            return data
        rows = list(data)
        if not rows:
            raise InvalidConfigurationError('no input data')
        return cls(
            np.vstack([c.design_row for c in rows]),
            [c.weight for c in rows],
            [c.observation for c in rows],
        )


def _problem_arrays(spec):
    rng = np.random.default_rng(spec.seed)
    points = rng.random(spec.d)
    design = np.cos(np.pi * np.outer(points, np.arange(spec.n)))
    # 1 - U(0,1) lies in (0, 1]
    weights = spec.weight_scale * (1.0 - rng.random(spec.d))
    truth = rng.uniform(1.0, 2.0, spec.n) * rng.choice([-1.0, 1.0], spec.n)
    observations = design @ truth + 0.01 * rng.standard_normal(spec.d)
    return design, weights, observations


def generate_problem(spec):
    """Deterministic stream of per-datum contributions from a cosine basis"""
    design, weights, observations = _problem_arrays(spec)
    for index in range(spec.d):
        yield DatumContribution(index, design[index], float(weights[index]), float(observations[index]))


class LocalMatrixBlock:
    """One rank's rows of the global matrix plus the matching RHS slice.

    A per-cell bitmap tracks which cells have been written so that a complete
    block can be asserted after the exchange.
    """

    def __init__(self, n, row_offset, local_rows):
        self.n = n
        self.row_offset = row_offset
        self.rows = np.zeros((local_rows, n), dtype=np.float64)
        self.rhs = np.zeros(local_rows, dtype=np.float64)
        self.is_set = np.zeros((local_rows, n), dtype=bool)
        self.evaluations = 0
        self.writes = 0

    @property
    def local_rows(self):
        return self.rows.shape[0]

    def owns(self, row):
        return self.row_offset <= row < self.row_offset + self.local_rows

    def local(self, row):
        return row - self.row_offset

    def get(self, row, col):
        return self.rows[self.local(row), col]

    def assign(self, row, col, value):
        if not self.owns(row):
            raise ProtocolViolationError(f'row {row} is not held by this block')
        local = self.local(row)
        if self.is_set[local, col]:
            raise ProtocolViolationError(f'cell ({row}, {col}) written twice')
        self.rows[local, col] = value
        self.is_set[local, col] = True
        self.writes += 1

    def store(self, rows, cols, values):
        local = np.asarray(rows) - self.row_offset
        if np.any(self.is_set[local, cols]):
            raise ProtocolViolationError('assigned cells written twice')
        self.rows[local, cols] = values
        self.is_set[local, cols] = True
        self.writes += len(values)

    def unset_count(self):
        return int(self.is_set.size - np.count_nonzero(self.is_set))

    def is_complete(self):
        return self.unset_count() == 0


def _cell_indices(p, me):
    rows, cols = [], []
    for assignment in rank_assignments(p, me):
        rows.extend([assignment.row] * len(assignment.columns))
        cols.extend(assignment.columns)
    return np.array(rows, dtype=np.intp), np.array(cols, dtype=np.intp)


def _contributions(data, start, stop, rows, cols, own_rows):
    """Per-datum terms w*(g_i*g_j) for each cell, then w*(g_i*b) for each owned row"""
    design = data.design[start:stop]
    cells = design[:, rows] * design[:, cols]
    rhs = design[:, own_rows] * data.observations[start:stop, None]
    return data.weights[start:stop, None] * np.concatenate([cells, rhs], axis=1)


def _split(count, parts):
    bounds = np.linspace(0, count, parts + 1).astype(int)
    return list(zip(bounds[:-1], bounds[1:]))


def _reduce_in_order(data, rows, cols, own_rows, threads):
    """Sum contributions strictly in datum order.

    Threads only compute terms; the additions happen on one thread, so the
    result is bit-identical for every thread count.
    """
    total = np.zeros(len(rows) + len(own_rows))
    step = BATCH_SIZE * threads
    for start in range(0, len(data), step):
        stop = min(start + step, len(data))
        slices = [(start + a, start + b) for a, b in _split(stop - start, threads)]
        terms = [None] * len(slices)

        def compute(k):
            terms[k] = _contributions(data, slices[k][0], slices[k][1], rows, cols, own_rows)

        if threads == 1:
            compute(0)
        else:
            workers = [threading.Thread(target=compute, args=(k,)) for k in range(len(slices))]
            for worker in workers:
                worker.start()
            for worker in workers:
                worker.join()
        for chunk in terms:
            for term in chunk:
                total += term
    return total


def _reduce_unordered(data, rows, cols, own_rows, threads):
    """Each thread reduces its own slice of the data; partials merge as threads finish"""
    total = np.zeros(len(rows) + len(own_rows))
    lock = threading.Lock()

    def reduce_slice(start, stop):
        partial = np.zeros_like(total)
        for batch in range(start, stop, BATCH_SIZE):
            for term in _contributions(data, batch, min(batch + BATCH_SIZE, stop), rows, cols, own_rows):
                partial += term
        with lock:
            total[:] += partial

    workers = [threading.Thread(target=reduce_slice, args=bounds) for bounds in _split(len(data), threads)]
    for worker in workers:
        worker.start()
    for worker in workers:
        worker.join()
    return total


def accumulate_assigned(me, p, data, threads=1, deterministic_reduction=True):
    if threads < 1:
        raise InvalidConfigurationError(f'thread count must be at least 1, got {threads}')
    data = ProblemData.from_contributions(data)
    if data.n != p.n:
        raise InvalidConfigurationError(f'data has {data.n} basis values, matrix has {p.n} rows')

    block = LocalMatrixBlock(p.n, p.starts[me], p.block_size(me))
    rows, cols = _cell_indices(p, me)
    own_rows = np.arange(p.starts[me], p.ends[me])

    if deterministic_reduction or threads == 1:
        total = _reduce_in_order(data, rows, cols, own_rows, threads)
    else:
        total = _reduce_unordered(data, rows, cols, own_rows, threads)

    block.store(rows, cols, total[:len(rows)])
    block.rhs[:] = total[len(rows):]
    block.evaluations = len(rows)
    logger.debug(f'rank {me}: {len(rows)} cells over {len(data)} data with {threads} threads')
    return block


def mirror_local(me, block):
    copies = 0
    for row in range(block.row_offset, block.row_offset + block.local_rows):
        for col in assigned_columns(block.n, row).columns:
            if col != row and block.owns(col):
                block.assign(col, row, block.get(row, col))
                copies += 1
    logger.debug(f'rank {me}: {copies} local mirror copies')
    return block


def build_outbox(me, p, block):
    """Pack every computed cell whose mirror lives on another rank, per destination"""
    cells = {}
    for row in p.rows_of(me):
        for col in assigned_columns(p.n, row).columns:
            dest = owner_of_row(p, col)
            if dest != me:
                cells.setdefault(dest, []).append((row, col, block.get(row, col)))
    return {dest: pack(triplets) for dest, triplets in cells.items()}


def assemble(spec, ranks, threads_per_rank=1, deterministic_reduction=True,
             concurrent_ranks=False, delivery_rng=None, performance=None):
    """Build the full distributed matrix; returns one complete block per rank"""
    performance = performance or PerformanceManager()
    p = partition_rows(spec.n, ranks)
    data = ProblemData(*_problem_arrays(spec))
    network = RankNetwork(ranks)
    arrival_rngs = delivery_rng.spawn(ranks) if delivery_rng is not None else [None] * ranks

    def build(me):
        block = accumulate_assigned(me, p, data, threads_per_rank, deterministic_reduction)
        mirror_local(me, block)
        plan = plan_exchange(p, me)
        network.send_outbox(me, build_outbox(me, p, block), plan)
        return block, plan

    # Every batch is posted before any rank starts receiving.
    with performance.phase('build'):
        built = network.run_ranks(build, concurrent=concurrent_ranks)
    blocks = [b for b, _ in built]
    plans = [plan for _, plan in built]

    with performance.phase('exchange'):
        def receive(me):
            for _, buffer in network.receive(me, plans[me], rng=arrival_rngs[me]):
                unpack_apply(buffer, p, me, blocks[me])
            if not blocks[me].is_complete():
                raise ProtocolViolationError(
                    f'rank {me} still has {blocks[me].unset_count()} unset cells after exchange')

        network.run_ranks(receive, concurrent=concurrent_ranks)

    logger.info(f'assembled n={spec.n} over {ranks} ranks: '
                f'{sum(b.evaluations for b in blocks)} explicit cells, '
                f'{sum(plan.total_sent() for plan in plans)} exchanged')
    return blocks


def gather_blocks(blocks):
    """Stack rank blocks into the dense global matrix and RHS"""
    ordered = sorted(blocks, key=lambda b: b.row_offset)
    return np.vstack([b.rows for b in ordered]), np.concatenate([b.rhs for b in ordered])


def problem_design(spec):
    """Design matrix of the synthetic data, used for fitted values"""
    return _problem_arrays(spec)[0]


def write_dumps(blocks, directory):
    os.makedirs(directory, exist_ok=True)
    paths = []
    for rank, block in enumerate(sorted(blocks, key=lambda b: b.row_offset)):
        triplets = [(block.row_offset + i, j, block.rows[i, j])
                    for i in range(block.local_rows) for j in range(block.n)]
        path = os.path.join(directory, f'rank_{rank}.bin')
        with open(path, 'wb') as f:
            f.write(pack(triplets))
        paths.append(path)
    logger.info(f'wrote {len(paths)} matrix dumps to {directory}')
    return paths


def gather_dumps(directory, n):
    """Merge per-rank triplet dumps into one dense matrix"""
    matrix = np.zeros((n, n))
    seen = np.zeros((n, n), dtype=bool)
    for path in sorted(glob.glob(os.path.join(directory, 'rank_*.bin'))):
        with open(path, 'rb') as f:
            for row, col, value in decode(f.read()):
                if seen[row, col]:
                    raise ProtocolViolationError(f'cell ({row}, {col}) appears in more than one dump')
                matrix[row, col] = value
                seen[row, col] = True
    if not seen.all():
        raise ProtocolViolationError(f'{int((~seen).sum())} cells missing from dumps in {directory}')
    return matrix


def write_matrix_csv(matrix, path):
    np.savetxt(path, matrix, delimiter=',', fmt='%.17g')
