import json
import os
import tempfile
import unittest

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from src.core.errors import UsageError
from src.core.report import DifferenceTable, RunReport, compare_runs, percentage_difference, solution_digest


class TestPercentageDifference(unittest.TestCase):
    def test_identical(self):
        """Test identical vectors differ by zero everywhere"""
        row = percentage_difference('coefficients', [1.0, -2.0, 3.0], [1.0, -2.0, 3.0])
        self.assertEqual((row.minimum, row.maximum, row.mean), (0.0, 0.0, 0.0))
        self.assertEqual(row.count, 3)

    @settings(max_examples=100, deadline=None)
    @given(arrays(np.float64, st.integers(min_value=1, max_value=50),
                  elements=st.floats(min_value=-1e6, max_value=1e6)))
    def test_self_comparison_is_zero(self, values):
        """Test any vector compared with itself differs by 0%"""
        row = percentage_difference('fitted_values', values, values.copy())
        self.assertEqual(row.maximum, 0.0)
        self.assertEqual(row.count, len(values))
        self.assertEqual(row.tiny, int(np.count_nonzero(np.abs(values) < 1e-30)))

    def test_known_values(self):
        """Test 10% on one element and 0% on the other"""
        row = percentage_difference('coefficients', [1.0, 2.0], [1.1, 2.0])
        self.assertAlmostEqual(row.maximum, 10.0)
        self.assertEqual(row.minimum, 0.0)
        self.assertAlmostEqual(row.mean, 5.0)

    def test_tiny_elements(self):
        """Test elements below the floor on both sides report 0% and are flagged"""
        row = percentage_difference('coefficients', [1e-31, 1.0], [5e-31, 1.0])
        self.assertEqual(row.tiny, 1)
        self.assertEqual(row.mean, 0.0)

    def test_tiny_baseline_only(self):
        """Test a tiny baseline against a real candidate is not hidden"""
        row = percentage_difference('coefficients', [0.0], [1e-3])
        self.assertEqual(row.tiny, 0)
        self.assertGreater(row.maximum, 1e20)

    def test_shape_mismatch(self):
        """Test vectors of different lengths cannot be compared"""
        with self.assertRaises(UsageError):
            percentage_difference('coefficients', [1.0], [1.0, 2.0])

    def test_empty(self):
        """Test empty vectors give an all-zero row"""
        self.assertEqual(percentage_difference('fitted_values', [], []).count, 0)


class TestRunReport(unittest.TestCase):
    def setUp(self):
        self.report = RunReport({'problem': {'N': '2'}}, {'solve': 0.5}, [1.0, 2.0], [3.0, 4.0, 5.0],
                                {'method': 'direct'})
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def test_json_sorted(self):
        """Test the JSON report is written with sorted keys"""
        payload = json.loads(self.report.to_json())
        self.assertEqual(list(payload), sorted(payload))
        self.assertEqual(payload['solution']['coefficients'], [1.0, 2.0])
        self.assertEqual(payload['solution']['digest'], solution_digest([1.0, 2.0]))

    def test_reproducible_payload_drops_timings(self):
        """Test timings are the only part left out of the reproducible payload"""
        other = RunReport(self.report.config, {'solve': 9.0}, [1.0, 2.0], [3.0, 4.0, 5.0], {'method': 'direct'})
        self.assertEqual(self.report.reproducible_payload(), other.reproducible_payload())
        self.assertNotIn('timings', json.loads(self.report.reproducible_payload()))

    def test_write_and_load(self):
        """Test a written report loads back with the same numbers"""
        path = os.path.join(self.tmp.name, 'report.json')
        self.report.write(path)
        loaded = RunReport.load(path)
        np.testing.assert_array_equal(loaded.solution, self.report.solution)
        np.testing.assert_array_equal(loaded.fitted, self.report.fitted)
        self.assertEqual(loaded.results, {'method': 'direct'})

    def test_compare_runs(self):
        """Test the comparison table covers coefficients and fitted values"""
        candidate = RunReport({}, {}, [1.0, 2.2], [3.0, 4.0, 5.0])
        table = compare_runs(self.report, candidate)
        self.assertAlmostEqual(table.row('coefficients').mean, 5.0)
        self.assertEqual(table.row('fitted_values').mean, 0.0)
        self.assertAlmostEqual(table.max_mean(), 5.0)
        with self.assertRaises(KeyError):
            table.row('residuals')

    def test_compare_mismatched_runs(self):
        """Test reports of different problems cannot be compared"""
        with self.assertRaises(UsageError):
            compare_runs(self.report, RunReport({}, {}, [1.0], [3.0, 4.0, 5.0]))
        with self.assertRaises(UsageError):
            compare_runs(self.report, RunReport({}, {}, [1.0, 2.0], [3.0]))

    def test_comparison_in_report(self):
        """Test an attached comparison is serialised and written as CSV"""
        self.report.comparison = compare_runs(self.report, self.report)
        payload = json.loads(self.report.to_json())
        self.assertEqual([row['metric'] for row in payload['comparison']], ['coefficients', 'fitted_values'])
        path = os.path.join(self.tmp.name, 'differences.csv')
        self.report.comparison.write_csv(path)
        with open(path) as f:
            self.assertEqual(f.readline().strip(), ','.join(DifferenceTable.FIELDS))


if __name__ == '__main__':
    unittest.main()
