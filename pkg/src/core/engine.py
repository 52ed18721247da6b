import logging
import os

import numpy as np

from .assembly import (ProblemSpec, assemble, gather_blocks, gather_dumps, problem_design,
                       write_dumps, write_matrix_csv)
from .gather_kernel import DEFAULT_DISTANCES, bench_kernel, do_prefetch, make_workload, no_prefetch
from .iterative_solver import IterativeConfig, solve_iterative
from .performance import PerformanceManager, machine_id
from .report import FLOOR_GUARD, RunReport, compare_runs
from .spectral_solver import (SolveMode, SolverConfig, apply_eigenpairs, eigendecompose, retained_count,
                              solve_split)
from .sym_assign import global_cell_count

SECTIONS = ('PROBLEM', 'ASSEMBLY', 'SOLVER', 'ITERATIVE', 'KERNEL', 'REPORT')


class Engine:
    def __init__(self, config):
        """Set up a run from a ConfigParser holding the effective configuration"""
        self.config = config
        self.logger = logging.getLogger('Engine')
        self.performance = PerformanceManager()

        self.spec = ProblemSpec.from_config(config)
        self.ranks = config.getint('ASSEMBLY', 'RANKS', fallback=1)
        self.threads = config.getint('ASSEMBLY', 'THREADS', fallback=1)
        self.deterministic_reduction = config.getboolean('ASSEMBLY', 'DETERMINISTIC_REDUCTION', fallback=True)
        self.concurrent_ranks = config.getboolean('ASSEMBLY', 'CONCURRENT_RANKS', fallback=False)
        self.method = config.get('SOLVER', 'METHOD', fallback='direct')
        self.floor_guard = config.getfloat('REPORT', 'FLOOR_GUARD', fallback=FLOOR_GUARD)

        self.blocks = None
        self.spectrum = None
        self.iterative_result = None
        self.bench_report = None

    def config_echo(self):
        return {section.lower(): dict(self.config.items(section))
                for section in SECTIONS if self.config.has_section(section)}

    def build(self):
        self.blocks = assemble(
            self.spec, self.ranks,
            threads_per_rank=self.threads,
            deterministic_reduction=self.deterministic_reduction,
            concurrent_ranks=self.concurrent_ranks,
            performance=self.performance,
        )
        return gather_blocks(self.blocks)

    def solve(self, A, b):
        results = {'method': self.method}
        with self.performance.phase('solve'):
            if self.method == 'iterative':
                self.iterative_result = solve_iterative(A, b, IterativeConfig.from_config(self.config))
                x = self.iterative_result.solution
                results.update({
                    'iterations': self.iterative_result.iterations,
                    'converged': self.iterative_result.converged,
                })
            else:
                cfg = SolverConfig.from_config(self.config)
                if cfg.mode is SolveMode.SPLIT:
                    x = solve_split(A, b, cfg)
                else:
                    self.spectrum = eigendecompose(A)
                    x = apply_eigenpairs(self.spectrum, b, cfg)
                    results['retained_pairs'] = retained_count(self.spectrum, cfg.threshold, cfg.requested_pairs)
        norm_b = np.linalg.norm(b)
        results['relative_residual'] = float(np.linalg.norm(A @ x - b) / norm_b) if norm_b else 0.0
        return x, results

    def bench(self):
        distance = self.config.getint('KERNEL', 'PREFETCH_DISTANCE', fallback=16)
        distances = self.config.get('KERNEL', 'DISTANCES', fallback='')
        distances = [int(d) for d in distances.split(',') if d.strip()] or list(DEFAULT_DISTANCES)
        if distance not in distances:
            distances.append(distance)
        workload = make_workload(
            self.config.getint('KERNEL', 'SIZE', fallback=256),
            seed=self.config.getint('KERNEL', 'SEED', fallback=0),
            prefetch_distance=distance,
        )
        prefetch = do_prefetch if self.config.getboolean('KERNEL', 'PREFETCH', fallback=True) else no_prefetch
        with self.performance.phase('bench'):
            self.bench_report = bench_kernel(
                workload, self.config.getint('KERNEL', 'REPETITIONS', fallback=5), sorted(distances), prefetch)
        return self.bench_report

    def run(self, baseline=None, dump_dir=None, tables_dir=None, bench=False):
        self.logger.info(f'run n={self.spec.n} d={self.spec.d} ranks={self.ranks} '
                         f'threads={self.threads} solver={self.method}')
        A, b = self.build()
        if dump_dir:
            write_dumps(self.blocks, dump_dir)
            write_matrix_csv(gather_dumps(dump_dir, self.spec.n), os.path.join(dump_dir, 'matrix.csv'))

        x, results = self.solve(A, b)
        results['explicit_cells'] = sum(block.evaluations for block in self.blocks)
        results['expected_cells'] = global_cell_count(self.spec.n)
        fitted = problem_design(self.spec) @ x

        if bench:
            self.bench()
        timings = self.performance.get_stats()
        timings['machine_id'] = machine_id()
        if self.bench_report is not None:
            timings['kernel_bench'] = self.bench_report.as_dicts()

        report = RunReport(self.config_echo(), timings, x, fitted, results)
        if baseline is not None:
            report.comparison = compare_runs(baseline, report, self.floor_guard)
            self.logger.info(f'largest mean difference vs baseline: {report.comparison.max_mean():.3e} %')

        if tables_dir:
            self.write_tables(report, tables_dir)
        return report

    def write_tables(self, report, directory):
        os.makedirs(directory, exist_ok=True)
        if self.spectrum is not None:
            self.spectrum.write_csv(os.path.join(directory, 'spectrum.csv'))
        if self.iterative_result is not None:
            self.iterative_result.write_trace_csv(os.path.join(directory, 'trace.csv'))
        if report.comparison is not None:
            report.comparison.write_csv(os.path.join(directory, 'differences.csv'))
        if self.bench_report is not None:
            self.bench_report.write_csv(os.path.join(directory, 'bench.csv'))
        self.logger.info(f'wrote tables to {directory}')
