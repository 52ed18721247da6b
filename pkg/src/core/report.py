import csv
import hashlib
import json

import numpy as np

from .errors import UsageError

# Elements whose magnitudes are both below this report 0% and are flagged tiny.
FLOOR_GUARD = 1e-30

TIMING_KEY = 'timings'


def solution_digest(x):
    return hashlib.sha256(np.asarray(x, dtype='<f8').tobytes()).hexdigest()


class DifferenceRow:
    def __init__(self, metric, minimum, maximum, mean, tiny, count):
        self.metric = metric
        self.minimum = minimum
        self.maximum = maximum
        self.mean = mean
        self.tiny = tiny
        self.count = count

    def as_dict(self):
        return {'metric': self.metric, 'min_pct': self.minimum, 'max_pct': self.maximum,
                'mean_pct': self.mean, 'tiny': self.tiny, 'count': self.count}


def percentage_difference(metric, baseline, candidate, floor_guard=FLOOR_GUARD):
    """|a-b| / max(|a|, floor_guard) * 100 per element, summarised as min/max/mean"""
    a = np.asarray(baseline, dtype=np.float64)
    b = np.asarray(candidate, dtype=np.float64)
    if a.shape != b.shape:
        raise UsageError(f'{metric}: cannot compare shapes {a.shape} and {b.shape}')
    if a.size == 0:
        return DifferenceRow(metric, 0.0, 0.0, 0.0, 0, 0)
    tiny = (np.abs(a) < floor_guard) & (np.abs(b) < floor_guard)
    pct = np.abs(a - b) / np.maximum(np.abs(a), floor_guard) * 100.0
    pct[tiny] = 0.0
    return DifferenceRow(metric, float(pct.min()), float(pct.max()), float(pct.mean()),
                         int(np.count_nonzero(tiny)), int(a.size))


class DifferenceTable:
    FIELDS = ('metric', 'min_pct', 'max_pct', 'mean_pct', 'tiny', 'count')

    def __init__(self, rows):
        self.rows = rows

    def row(self, metric):
        for row in self.rows:
            if row.metric == metric:
                return row
        raise KeyError(metric)

    def max_mean(self):
        return max((row.mean for row in self.rows), default=0.0)

    def as_dicts(self):
        return [row.as_dict() for row in self.rows]

    def write_csv(self, path):
        with open(path, 'w', newline='') as f:
            writer = csv.DictWriter(f, fieldnames=self.FIELDS)
            writer.writeheader()
            writer.writerows(self.as_dicts())


class RunReport:
    """Everything one run produced; timings are the only non-reproducible part"""

    def __init__(self, config, timings, solution, fitted, results=None, comparison=None):
        self.config = config
        self.timings = timings
        self.solution = np.asarray(solution, dtype=np.float64)
        self.fitted = np.asarray(fitted, dtype=np.float64)
        self.results = results or {}
        self.comparison = comparison

    def as_dict(self):
        payload = {
            'config': self.config,
            TIMING_KEY: self.timings,
            'solution': {
                'digest': solution_digest(self.solution),
                'coefficients': self.solution.tolist(),
                'fitted_values': self.fitted.tolist(),
            },
            'results': self.results,
        }
        if self.comparison is not None:
            payload['comparison'] = self.comparison.as_dicts()
        return payload

    def to_json(self):
        return json.dumps(self.as_dict(), sort_keys=True, indent=2)

    def reproducible_payload(self):
        payload = self.as_dict()
        payload.pop(TIMING_KEY)
        return json.dumps(payload, sort_keys=True)

    def write(self, path):
        with open(path, 'w') as f:
            f.write(self.to_json())
            f.write('\n')

    @classmethod
    def from_dict(cls, payload):
        return cls(
            config=payload.get('config', {}),
            timings=payload.get(TIMING_KEY, {}),
            solution=payload['solution']['coefficients'],
            fitted=payload['solution']['fitted_values'],
            results=payload.get('results', {}),
        )

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls.from_dict(json.load(f))


def compare_runs(baseline, candidate, floor_guard=FLOOR_GUARD):
    if baseline.solution.shape != candidate.solution.shape:
        raise UsageError(f'reports have different coefficient counts: '
                         f'{len(baseline.solution)} vs {len(candidate.solution)}')
    if baseline.fitted.shape != candidate.fitted.shape:
        raise UsageError(f'reports have different data counts: '
                         f'{len(baseline.fitted)} vs {len(candidate.fitted)}')
    return DifferenceTable([
        percentage_difference('coefficients', baseline.solution, candidate.solution, floor_guard),
        percentage_difference('fitted_values', baseline.fitted, candidate.fitted, floor_guard),
    ])
