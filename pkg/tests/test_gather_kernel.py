import csv
import os
import tempfile
import unittest

import numpy as np

from src.core.errors import WorkloadValidationError
from src.core.gather_kernel import (DEFAULT_DISTANCES, IrregularWorkload, bench_kernel, make_workload, no_prefetch,
                                    run_pipelined, run_plain)


def reference_kernel(w):
    """Straight transcription of the access pattern on a private copy"""
    matrix = w.matrix.copy()
    for j in range(w.n):
        for i in range(w.n):
            matrix[w.dataloc[i], j] = matrix[w.dataloc[i], j] + w.weight * w.equations[int(w.inputdata[i, j])]
    return matrix


class TestKernels(unittest.TestCase):
    def setUp(self):
        self.workload = make_workload(48, seed=3)

    def test_plain_matches_reference(self):
        """Test the plain kernel against a direct transcription"""
        expected = reference_kernel(self.workload)
        np.testing.assert_array_equal(run_plain(self.workload.copy()), expected)

    def test_contiguous_indices(self):
        """Test sequential indices add weight * source in place"""
        w = make_workload(8, contiguous=True, weight=1.0)
        original = w.matrix.copy()
        result = run_plain(w)
        equations = np.array(w.equations).reshape(8, 8)
        np.testing.assert_array_equal(result, original + equations)

    def test_pipelined_bit_identical(self):
        """Test every prefetch distance reproduces the plain kernel exactly"""
        for seed in range(20):
            w = make_workload(int(np.random.default_rng(seed).integers(1, 40)), seed=seed)
            expected = run_plain(w.copy())
            for distance in DEFAULT_DISTANCES:
                np.testing.assert_array_equal(run_pipelined(w.copy(distance)), expected)

    def test_distance_beyond_extent(self):
        """Test a distance at or past n degenerates to warm-up then compute"""
        w = make_workload(5, seed=1)
        expected = run_plain(w.copy())
        np.testing.assert_array_equal(run_pipelined(w.copy(5)), expected)
        np.testing.assert_array_equal(run_pipelined(w.copy(500)), expected)

    def test_without_prefetch(self):
        """Test the no-op prefetch gives the same result"""
        w = make_workload(12, seed=2)
        np.testing.assert_array_equal(run_pipelined(w.copy(), prefetch=no_prefetch), run_plain(w.copy()))

    def test_empty_loop(self):
        """Test n=0 leaves the destination unchanged"""
        matrix = np.arange(4.0).reshape(2, 2)
        w = IrregularWorkload(0, matrix.copy(), [1.0], [], np.zeros((0, 0), dtype=int))
        np.testing.assert_array_equal(run_plain(w), matrix)
        np.testing.assert_array_equal(run_pipelined(w), matrix)

    def test_seed_reproducible(self):
        """Test workloads are reproducible from their seed"""
        a, b = make_workload(16, seed=9), make_workload(16, seed=9)
        self.assertEqual(a.dataloc, b.dataloc)
        np.testing.assert_array_equal(a.inputdata, b.inputdata)
        self.assertEqual(a.equations, b.equations)


class TestValidation(unittest.TestCase):
    def test_row_out_of_range(self):
        """Test dataloc entries past the destination rows are rejected"""
        w = make_workload(4, seed=0)
        w.dataloc = [0, 1, 2, 4]
        with self.assertRaisesRegex(WorkloadValidationError, 'dataloc'):
            run_plain(w)

    def test_offset_out_of_range(self):
        """Test inputdata offsets past the source array are rejected"""
        w = make_workload(4, seed=0)
        w.inputdata = w.inputdata.copy()
        w.inputdata[2, 3] = len(w.equations)
        with self.assertRaisesRegex(WorkloadValidationError, 'inputdata'):
            run_pipelined(w)

    def test_short_index_arrays(self):
        """Test index arrays smaller than the loop extent are rejected"""
        w = make_workload(4, seed=0)
        w.dataloc = w.dataloc[:3]
        with self.assertRaises(WorkloadValidationError):
            run_plain(w)

    def test_bad_distance(self):
        """Test negative and zero distances"""
        with self.assertRaises(WorkloadValidationError):
            run_plain(make_workload(4, prefetch_distance=-1))
        with self.assertRaises(WorkloadValidationError):
            run_pipelined(make_workload(4, prefetch_distance=0))


class TestBench(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def test_report_rows(self):
        """Test one plain row and one row per distance, tagged with the machine"""
        report = bench_kernel(make_workload(8, seed=1), repetitions=2, distances=(1, 4))
        self.assertEqual([(r.variant, r.distance) for r in report.rows],
                         [('plain', 0), ('pipelined', 1), ('pipelined', 4)])
        for row in report.rows:
            self.assertEqual(row.iterations, 64)
            self.assertGreaterEqual(row.median_ns, 0)
            self.assertEqual(row.machine_id, report.machine_id)

    def test_bench_leaves_workload_untouched(self):
        """Test timing runs work on copies of the destination"""
        w = make_workload(8, seed=1)
        before = w.matrix.copy()
        bench_kernel(w, repetitions=1)
        np.testing.assert_array_equal(w.matrix, before)

    def test_csv(self):
        """Test the bench table is written with its header"""
        path = os.path.join(self.tmp.name, 'bench.csv')
        bench_kernel(make_workload(4), repetitions=1, distances=(2,)).write_csv(path)
        with open(path, newline='') as f:
            rows = list(csv.DictReader(f))
        self.assertEqual(len(rows), 2)
        self.assertEqual(rows[1]['variant'], 'pipelined')
        self.assertEqual(rows[1]['distance'], '2')

    def test_invalid_repetitions(self):
        """Test at least one repetition is required"""
        with self.assertRaises(WorkloadValidationError):
            bench_kernel(make_workload(4), repetitions=0)


if __name__ == '__main__':
    unittest.main()
