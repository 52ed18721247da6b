import platform
import statistics
import time
from collections import deque
from contextlib import contextmanager


def machine_id():
    """Identify the host so timings are never compared across machines silently"""
    return '/'.join(part for part in (
        platform.node(),
        platform.machine(),
        platform.processor() or 'unknown-cpu',
        f'{platform.python_implementation()}-{platform.python_version()}',
    ) if part)


class PerformanceManager:
    def __init__(self, history=60):
        """Initialize performance manager"""
        self.history = history
        self.phase_times = {}  # {phase: deque of seconds}
        self.phase_order = []

    @contextmanager
    def phase(self, name):
        """Time a block of work under a phase name"""
        start = time.perf_counter()
        try:
            yield
        finally:
            self.record(name, time.perf_counter() - start)

    def record(self, name, seconds):
        if name not in self.phase_times:
            self.phase_times[name] = deque(maxlen=self.history)
            self.phase_order.append(name)
        self.phase_times[name].append(seconds)

    def last(self, name):
        times = self.phase_times.get(name)
        return times[-1] if times else 0.0

    def total(self, name):
        return sum(self.phase_times.get(name, ()))

    def clear(self):
        self.phase_times.clear()
        self.phase_order.clear()

    def get_stats(self):
        """Wall time per phase in seconds, in the order phases first ran"""
        return {name: round(self.total(name), 6) for name in self.phase_order}


def median_time_ns(work, repetitions):
    """Median wall time of work() over repetitions, in nanoseconds"""
    samples = []
    for _ in range(repetitions):
        start = time.perf_counter_ns()
        work()
        samples.append(time.perf_counter_ns() - start)
    return int(statistics.median(samples))
