import unittest

from src.core.performance import PerformanceManager, machine_id, median_time_ns


class TestPerformanceManager(unittest.TestCase):
    def setUp(self):
        self.performance = PerformanceManager(history=3)

    def test_phases_in_first_run_order(self):
        """Test stats list phases in the order they first ran"""
        with self.performance.phase('build'):
            pass
        with self.performance.phase('solve'):
            pass
        with self.performance.phase('build'):
            pass
        self.assertEqual(list(self.performance.get_stats()), ['build', 'solve'])

    def test_history_bound(self):
        """Test only the most recent samples are kept"""
        for seconds in (1.0, 2.0, 3.0, 4.0):
            self.performance.record('solve', seconds)
        self.assertEqual(self.performance.total('solve'), 9.0)
        self.assertEqual(self.performance.last('solve'), 4.0)
        self.assertEqual(self.performance.last('build'), 0.0)

    def test_phase_recorded_on_error(self):
        """Test a phase that raises is still timed"""
        with self.assertRaises(ValueError):
            with self.performance.phase('exchange'):
                raise ValueError('boom')
        self.assertIn('exchange', self.performance.get_stats())

    def test_clear(self):
        """Test clearing drops every phase"""
        self.performance.record('build', 1.0)
        self.performance.clear()
        self.assertEqual(self.performance.get_stats(), {})


class TestTiming(unittest.TestCase):
    def test_median_time(self):
        """Test the median runs the work once per repetition"""
        calls = []
        self.assertGreaterEqual(median_time_ns(lambda: calls.append(1), 5), 0)
        self.assertEqual(len(calls), 5)

    def test_machine_id(self):
        """Test the machine id is a non-empty string"""
        self.assertTrue(machine_id())


if __name__ == '__main__':
    unittest.main()
