"""Krylov solvers over the assembled normal equations.

Conjugate gradients is the default for the symmetric positive definite
normal matrix; restarted GMRES covers indefinite systems. Running out of
iterations is reported in the result, not raised.
"""
import csv
import logging
from collections import namedtuple
from enum import Enum

import numpy as np

from .errors import InvalidConfigurationError, NotPositiveDefiniteError, SolverError
from .spectral_solver import check_symmetric

logger = logging.getLogger('IterativeSolver')

# Cholesky check is only attempted below this size
PD_CHECK_LIMIT = 2000

TraceEntry = namedtuple('TraceEntry', ['iteration', 'recurrence_residual', 'true_residual'])


class Preconditioner(Enum):
    NONE = 'none'
    JACOBI = 'jacobi'


class Krylov(Enum):
    CG = 'cg'
    GMRES = 'gmres'


class IterativeConfig:
    def __init__(self, rel_tolerance=1e-4, max_iterations=None, preconditioner=Preconditioner.JACOBI,
                 method=Krylov.CG, restart=30, record_iterates=False):
        if not 0 < rel_tolerance < 1:
            raise InvalidConfigurationError(f'relative tolerance must lie in (0, 1), got {rel_tolerance}')
        if max_iterations is not None and max_iterations < 1:
            raise InvalidConfigurationError(f'max iterations must be positive, got {max_iterations}')
        if restart < 1:
            raise InvalidConfigurationError(f'restart length must be positive, got {restart}')
        self.rel_tolerance = rel_tolerance
        self.max_iterations = max_iterations
        self.preconditioner = Preconditioner(preconditioner)
        self.method = Krylov(method)
        self.restart = restart
        self.record_iterates = record_iterates

    @classmethod
    def from_config(cls, config):
        return cls(
            rel_tolerance=config.getfloat('ITERATIVE', 'TOLERANCE', fallback=1e-4),
            max_iterations=config.getint('ITERATIVE', 'MAX_ITERATIONS', fallback=0) or None,
            preconditioner=config.get('ITERATIVE', 'PRECONDITIONER', fallback='jacobi'),
            method=config.get('ITERATIVE', 'KRYLOV', fallback='cg'),
            restart=config.getint('ITERATIVE', 'RESTART', fallback=30),
        )

    def iteration_limit(self, n):
        return self.max_iterations or 10 * n


class IterativeResult:
    def __init__(self, solution, iterations, relative_residual, converged, trace, iterates=None):
        self.solution = solution
        self.iterations = iterations
        self.relative_residual = relative_residual
        self.converged = converged
        self.trace = trace
        self.iterates = iterates or []

    def write_trace_csv(self, path):
        with open(path, 'w', newline='') as f:
            writer = csv.writer(f)
            writer.writerow(TraceEntry._fields)
            for entry in self.trace:
                writer.writerow([entry.iteration, repr(float(entry.recurrence_residual)),
                                 repr(float(entry.true_residual))])


def relative_residual(A, x, b):
    norm_b = np.linalg.norm(b)
    if norm_b == 0:
        return float(np.linalg.norm(A @ x))
    return float(np.linalg.norm(b - A @ x) / norm_b)


def check_positive_definite(A):
    if A.shape[0] > PD_CHECK_LIMIT:
        logger.debug(f'skipping Cholesky check for n={A.shape[0]}')
        return
    try:
        np.linalg.cholesky(A)
    except np.linalg.LinAlgError as e:
        raise NotPositiveDefiniteError(
            'conjugate gradients needs a positive definite matrix; use the gmres method instead',
            diagnostics={'n': A.shape[0]}) from e


def _jacobi(A, cfg):
    if cfg.preconditioner is Preconditioner.NONE:
        return np.ones(A.shape[0])
    diagonal = np.diag(A)
    if np.any(diagonal == 0):
        raise SolverError('Jacobi preconditioner needs a nonzero diagonal')
    return 1.0 / diagonal


def _conjugate_gradients(A, b, cfg):
    n = len(b)
    inverse_diagonal = _jacobi(A, cfg)
    norm_b = np.linalg.norm(b)
    tolerance = cfg.rel_tolerance * norm_b
    x = np.zeros(n)
    r = b.copy()
    z = inverse_diagonal * r
    p = z.copy()
    gamma = r @ z
    trace = []
    iterates = [x.copy()] if cfg.record_iterates else None

    for iteration in range(1, cfg.iteration_limit(n) + 1):
        Ap = A @ p
        curvature = p @ Ap
        if curvature <= 0:
            raise NotPositiveDefiniteError(f'non-positive curvature {curvature:.3e} at iteration {iteration}')
        alpha = gamma / curvature
        x += alpha * p
        r -= alpha * Ap
        recurrence = np.linalg.norm(r) / norm_b
        true = relative_residual(A, x, b)
        trace.append(TraceEntry(iteration, recurrence, true))
        if iterates is not None:
            iterates.append(x.copy())
        if np.linalg.norm(r) < tolerance:
            if true <= cfg.rel_tolerance:
                return x, iteration, True, trace, iterates
            # The recurrence drifted away from the true residual; restart from it.
            r = b - A @ x
        z = inverse_diagonal * r
        gamma_old = gamma
        gamma = r @ z
        p = z + (gamma / gamma_old) * p
    return x, cfg.iteration_limit(n), False, trace, iterates


def _gmres(A, b, cfg):
    """Restarted GMRES with right Jacobi preconditioning, so residuals are unpreconditioned"""
    n = len(b)
    inverse_diagonal = _jacobi(A, cfg)
    norm_b = np.linalg.norm(b)
    limit = cfg.iteration_limit(n)
    restart = min(cfg.restart, n)
    x = np.zeros(n)
    trace = []
    iterates = [x.copy()] if cfg.record_iterates else None
    iteration = 0

    while iteration < limit:
        r = b - A @ x
        beta = np.linalg.norm(r)
        if beta / norm_b <= cfg.rel_tolerance:
            return x, iteration, True, trace, iterates
        V = np.zeros((n, restart + 1))
        H = np.zeros((restart + 1, restart))
        cs, sn = np.zeros(restart), np.zeros(restart)
        g = np.zeros(restart + 1)
        g[0] = beta
        V[:, 0] = r / beta
        steps = 0
        for k in range(restart):
            iteration += 1
            steps = k + 1
            w = A @ (inverse_diagonal * V[:, k])
            for i in range(k + 1):
                H[i, k] = w @ V[:, i]
                w -= H[i, k] * V[:, i]
            H[k + 1, k] = np.linalg.norm(w)
            if H[k + 1, k] > 0:
                V[:, k + 1] = w / H[k + 1, k]
            for i in range(k):
                upper = cs[i] * H[i, k] + sn[i] * H[i + 1, k]
                H[i + 1, k] = -sn[i] * H[i, k] + cs[i] * H[i + 1, k]
                H[i, k] = upper
            denominator = np.hypot(H[k, k], H[k + 1, k])
            if denominator == 0:
                raise SolverError(f'GMRES breakdown at iteration {iteration}')
            cs[k], sn[k] = H[k, k] / denominator, H[k + 1, k] / denominator
            H[k, k] = denominator
            H[k + 1, k] = 0.0
            g[k + 1] = -sn[k] * g[k]
            g[k] = cs[k] * g[k]
            recurrence = abs(g[k + 1]) / norm_b
            y = np.linalg.solve(np.triu(H[:steps, :steps]), g[:steps])
            candidate = x + inverse_diagonal * (V[:, :steps] @ y)
            trace.append(TraceEntry(iteration, recurrence, relative_residual(A, candidate, b)))
            if iterates is not None:
                iterates.append(candidate)
            if recurrence <= cfg.rel_tolerance or iteration >= limit:
                break
        x = candidate
        if trace[-1].true_residual <= cfg.rel_tolerance:
            return x, iteration, True, trace, iterates
    return x, iteration, False, trace, iterates


def solve_iterative(A, b, cfg):
    A = check_symmetric(A)
    b = np.asarray(b, dtype=np.float64)
    if A.shape[0] != len(b):
        raise InvalidConfigurationError(f'matrix is {A.shape[0]}x{A.shape[0]}, RHS has {len(b)} entries')
    if not np.any(b):
        return IterativeResult(np.zeros(len(b)), 0, 0.0, True, [])

    if cfg.method is Krylov.CG:
        check_positive_definite(A)
        x, iterations, converged, trace, iterates = _conjugate_gradients(A, b, cfg)
    else:
        x, iterations, converged, trace, iterates = _gmres(A, b, cfg)

    residual = relative_residual(A, x, b)
    if converged:
        logger.info(f'{cfg.method.value} converged in {iterations} iterations, residual {residual:.3e}')
    else:
        logger.warning(f'{cfg.method.value} did not reach {cfg.rel_tolerance} within {iterations} '
                       f'iterations, residual {residual:.3e}')
    return IterativeResult(x, iterations, residual, converged, trace, iterates)
