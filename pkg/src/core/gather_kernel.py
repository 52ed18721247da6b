"""Irregular-access accumulation kernel and its software-pipelined variant.

The pipelined loop runs a prefetch stage `prefetch_distance` iterations ahead
of the accumulate stage. Prefetching only touches memory, so both variants
produce bit-identical output.

Only the matrix and equations accesses are prefetched. dataloc and inputdata
are read contiguously and a third pipeline stage for them only adds work.
"""
import csv
import logging

import numpy as np

from .errors import WorkloadValidationError
from .performance import machine_id, median_time_ns

logger = logging.getLogger('GatherKernel')

DEFAULT_PREFETCH_DISTANCE = 16
DEFAULT_DISTANCES = (1, 2, 4, 8, 16, 32, 64)


def do_prefetch(array, index):
    # A read of the element stands in for an L1 prefetch; the value is dropped.
    array[index]


def no_prefetch(array, index):
    pass


class IrregularWorkload:
    def __init__(self, n, matrix, equations, dataloc, inputdata,
                 prefetch_distance=DEFAULT_PREFETCH_DISTANCE, weight=1.0):
        self.n = n
        self.matrix = matrix
        self.equations = equations
        self.dataloc = dataloc
        self.inputdata = inputdata
        self.prefetch_distance = prefetch_distance
        self.weight = weight

    def copy(self, prefetch_distance=None):
        """Same indices and sources over a fresh copy of the destination"""
        return IrregularWorkload(
            self.n, self.matrix.copy(), self.equations, self.dataloc, self.inputdata,
            self.prefetch_distance if prefetch_distance is None else prefetch_distance,
            self.weight,
        )

    def validate(self):
        if self.prefetch_distance < 0:
            raise WorkloadValidationError(f'prefetch distance must be non-negative, got {self.prefetch_distance}')
        if self.n == 0:
            return
        if len(self.dataloc) < self.n or self.inputdata.shape[0] < self.n or self.inputdata.shape[1] < self.n:
            raise WorkloadValidationError(f'index arrays are smaller than the loop extent {self.n}')
        if self.matrix.shape[1] < self.n:
            raise WorkloadValidationError(f'matrix has {self.matrix.shape[1]} columns, loop needs {self.n}')
        dataloc = np.asarray(self.dataloc[:self.n])
        inputdata = np.asarray(self.inputdata[:self.n, :self.n])
        if dataloc.min() < 0 or dataloc.max() >= self.matrix.shape[0]:
            raise WorkloadValidationError('dataloc holds a row outside the destination matrix')
        if inputdata.min() < 0 or inputdata.max() >= len(self.equations):
            raise WorkloadValidationError('inputdata holds an offset outside the equations array')


def make_workload(n, seed=0, rows=None, equations_size=None,
                  prefetch_distance=DEFAULT_PREFETCH_DISTANCE, weight=0.5, contiguous=False):
    """Reproducible workload; contiguous=True gives sequential indices"""
    rows = n if rows is None else rows
    equations_size = n * n if equations_size is None else equations_size
    rng = np.random.default_rng(seed)
    equations = rng.standard_normal(equations_size)
    matrix = rng.standard_normal((rows, n))
    if contiguous:
        dataloc = np.arange(n) % rows
        inputdata = np.arange(n * n).reshape(n, n) % equations_size
    else:
        dataloc = rng.integers(0, rows, n)
        inputdata = rng.integers(0, equations_size, (n, n))
    # Python ints index far faster than numpy scalars in the hot loops.
    return IrregularWorkload(n, matrix, equations.tolist(), dataloc.tolist(),
                             np.asarray(inputdata), prefetch_distance, weight)


def _as_lists(w):
    return w.matrix.tolist(), w.inputdata.tolist()


def run_plain(w):
    w.validate()
    matrix, inputdata = _as_lists(w)
    equations, dataloc, weight = w.equations, w.dataloc, w.weight
    for j in range(w.n):
        for i in range(w.n):
            row = matrix[dataloc[i]]
            row[j] = row[j] + weight * equations[inputdata[i][j]]
    w.matrix[:] = matrix
    return w.matrix


def run_pipelined(w, prefetch=do_prefetch):
    w.validate()
    if w.prefetch_distance < 1:
        raise WorkloadValidationError('the pipelined kernel needs a prefetch distance of at least 1')
    matrix, inputdata = _as_lists(w)
    equations, dataloc, weight = w.equations, w.dataloc, w.weight
    n, distance = w.n, w.prefetch_distance
    for j in range(n):
        for i in range(min(distance, n)):
            prefetch(matrix[dataloc[i]], j)
            prefetch(equations, inputdata[i][j])
        for i in range(n):
            k = i + distance
            if k < n:
                prefetch(matrix[dataloc[k]], j)
                prefetch(equations, inputdata[k][j])
            row = matrix[dataloc[i]]
            row[j] = row[j] + weight * equations[inputdata[i][j]]
    w.matrix[:] = matrix
    return w.matrix


class BenchRow:
    def __init__(self, variant, distance, median_ns, iterations, machine):
        self.variant = variant
        self.distance = distance
        self.median_ns = median_ns
        self.iterations = iterations
        self.machine_id = machine

    def as_dict(self):
        return {'variant': self.variant, 'distance': self.distance, 'median_ns': self.median_ns,
                'iterations': self.iterations, 'machine_id': self.machine_id}


class BenchReport:
    FIELDS = ('variant', 'distance', 'median_ns', 'iterations', 'machine_id')

    def __init__(self, rows, machine):
        self.rows = rows
        self.machine_id = machine

    def as_dicts(self):
        return [row.as_dict() for row in self.rows]

    def write_csv(self, path):
        with open(path, 'w', newline='') as f:
            writer = csv.DictWriter(f, fieldnames=self.FIELDS)
            writer.writeheader()
            writer.writerows(self.as_dicts())


def bench_kernel(w, repetitions, distances=(DEFAULT_PREFETCH_DISTANCE,), prefetch=do_prefetch):
    """Median wall time of the plain kernel and of the pipelined one per distance.

    Every repetition runs on a fresh copy of the destination so all variants
    start from the same state. Timings are reported, never compared.
    """
    if repetitions < 1:
        raise WorkloadValidationError(f'repetitions must be at least 1, got {repetitions}')
    w.validate()
    machine = machine_id()
    iterations = w.n * w.n
    rows = [BenchRow('plain', 0, median_time_ns(lambda: run_plain(w.copy()), repetitions),
                     iterations, machine)]
    for distance in distances:
        median_ns = median_time_ns(lambda: run_pipelined(w.copy(distance), prefetch), repetitions)
        rows.append(BenchRow('pipelined', distance, median_ns, iterations, machine))
    for row in rows:
        logger.info(f'{row.variant:9s} distance={row.distance:3d} median={row.median_ns} ns')
    return BenchReport(rows, machine)
