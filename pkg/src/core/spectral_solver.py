import csv
import logging
from enum import Enum

import numpy as np
import scipy.linalg

from .errors import DivisionGuardError, InvalidConfigurationError, SolverError, SymmetryError

logger = logging.getLogger('SpectralSolver')

SYMMETRY_TOLERANCE = 1e-12


class SolveMode(Enum):
    FULL = 'full'
    SPLIT = 'split'


def reciprocal_weight(eigenvalues):
    return 1.0 / eigenvalues


class Spectrum:
    """Eigenpairs ordered by descending |eigenvalue|; eigenvectors are columns"""

    def __init__(self, eigenvalues, eigenvectors):
        self.eigenvalues = np.asarray(eigenvalues, dtype=np.float64)
        self.eigenvectors = np.asarray(eigenvectors, dtype=np.float64)

    @property
    def count(self):
        return len(self.eigenvalues)

    @property
    def n(self):
        return self.eigenvectors.shape[0]

    def pair(self, k):
        return self.eigenvalues[k], self.eigenvectors[:, k]

    def write_csv(self, path):
        with open(path, 'w', newline='') as f:
            writer = csv.writer(f)
            writer.writerow(['index', 'eigenvalue'])
            for k, value in enumerate(self.eigenvalues):
                writer.writerow([k, repr(float(value))])


class SolverConfig:
    def __init__(self, threshold=0.0, mode=SolveMode.FULL, requested_pairs=None, weight=reciprocal_weight):
        if threshold < 0:
            raise InvalidConfigurationError(f'eigenvalue threshold must be non-negative, got {threshold}')
        if requested_pairs is not None and requested_pairs < 1:
            raise InvalidConfigurationError(f'requested eigenpairs must be at least 1, got {requested_pairs}')
        self.threshold = threshold
        self.mode = SolveMode(mode)
        self.requested_pairs = requested_pairs
        self.weight = weight

    @classmethod
    def from_config(cls, config):
        method = config.get('SOLVER', 'METHOD', fallback='direct')
        pairs = config.getint('SOLVER', 'REQUESTED_PAIRS', fallback=0)
        return cls(
            threshold=config.getfloat('SOLVER', 'THRESHOLD', fallback=0.0),
            mode=SolveMode.SPLIT if method == 'split' else SolveMode.FULL,
            requested_pairs=pairs or None,
        )


def check_symmetric(A, tolerance=SYMMETRY_TOLERANCE):
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise SymmetryError(f'expected a square matrix, got shape {A.shape}')
    scale = np.abs(A).max() if A.size else 0.0
    asymmetry = np.abs(A - A.T).max() if A.size else 0.0
    if asymmetry > tolerance * scale:
        raise SymmetryError(f'matrix is not symmetric: max |A - A^T| = {asymmetry:.3e}, max |A| = {scale:.3e}')
    return A


def _by_magnitude(eigenvalues, eigenvectors):
    order = np.argsort(-np.abs(eigenvalues), kind='stable')
    return Spectrum(eigenvalues[order], eigenvectors[:, order])


def _eigh(A, subset_by_index=None):
    try:
        return scipy.linalg.eigh(A, subset_by_index=subset_by_index, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise SolverError(f'eigendecomposition failed: {e}',
                          diagnostics={'n': A.shape[0], 'subset': subset_by_index,
                                       'finite': bool(np.isfinite(A).all())}) from e


def eigendecompose(A):
    A = check_symmetric(A)
    eigenvalues, eigenvectors = _eigh(A)
    logger.debug(f'eigendecomposition of n={A.shape[0]}: |lambda| in '
                 f'[{np.abs(eigenvalues).min():.3e}, {np.abs(eigenvalues).max():.3e}]')
    return _by_magnitude(eigenvalues, eigenvectors)


def check_requested_pairs(requested_pairs, available):
    if requested_pairs is not None and requested_pairs > available:
        raise InvalidConfigurationError(f'requested {requested_pairs} eigenpairs, only {available} available')


def retained_count(s, threshold, requested_pairs=None):
    check_requested_pairs(requested_pairs, s.count)
    return int(np.count_nonzero(np.abs(s.eigenvalues[:requested_pairs]) > threshold))


def apply_eigenpairs(s, b, cfg):
    b = np.asarray(b, dtype=np.float64)
    if s.n != len(b):
        raise InvalidConfigurationError(f'spectrum is over n={s.n}, RHS has {len(b)} entries')
    check_requested_pairs(cfg.requested_pairs, s.count)
    eigenvalues, eigenvectors = s.eigenvalues, s.eigenvectors
    if cfg.requested_pairs is not None:
        eigenvalues, eigenvectors = eigenvalues[:cfg.requested_pairs], eigenvectors[:, :cfg.requested_pairs]

    # Ties at the threshold are discarded.
    keep = np.abs(eigenvalues) > cfg.threshold
    values, vectors = eigenvalues[keep], eigenvectors[:, keep]
    with np.errstate(divide='ignore', over='ignore'):
        weights = cfg.weight(values)
    if not np.all(np.isfinite(weights)):
        smallest = float(np.abs(values).min())
        raise DivisionGuardError(f'weight of a retained eigenvalue is not finite '
                                 f'(smallest |lambda| = {smallest:.3e}); raise the threshold',
                                 diagnostics={'smallest': smallest})
    logger.debug(f'applying {len(values)} of {len(eigenvalues)} eigenpairs')
    return vectors @ (weights * (vectors.T @ b))


def _magnitude_halves(eigenvalues):
    """Algebraic index ranges holding the n/2 largest- and n/2 smallest-magnitude pairs.

    The large half is the union of a bottom range and a top range of the
    ascending spectrum; the small half is the contiguous range in between.
    """
    n = len(eigenvalues)
    large = (n + 1) // 2
    order = np.argsort(-np.abs(eigenvalues), kind='stable')
    chosen = np.zeros(n, dtype=bool)
    chosen[order[:large]] = True
    bottom = 0
    while bottom < n and chosen[bottom]:
        bottom += 1
    top = n - (large - bottom)
    ranges_large = [r for r in ((0, bottom), (top, n)) if r[1] > r[0]]
    small = (bottom, top) if top > bottom else None
    return ranges_large, small


def _partial_spectrum(A, ranges):
    values, vectors = [], []
    for lo, hi in ranges:
        w, v = _eigh(A, subset_by_index=[lo, hi - 1])
        values.append(w)
        vectors.append(v)
    return _by_magnitude(np.concatenate(values), np.hstack(vectors))


def _complement_spectrum(A, basis):
    """Eigenpairs of A restricted to the orthogonal complement of basis.

    basis spans an invariant subspace, so its complement is invariant too and a
    Rayleigh-Ritz solve there yields exactly the remaining pairs, including the
    rest of an eigenvalue cluster that basis only partly covers.
    """
    q, _ = scipy.linalg.qr(basis, mode='full')
    complement = q[:, basis.shape[1]:]
    projected = complement.T @ A @ complement
    w, y = _eigh((projected + projected.T) / 2)
    return _by_magnitude(w, complement @ y)


def _half_config(cfg, pairs):
    return SolverConfig(cfg.threshold, requested_pairs=pairs, weight=cfg.weight)


def solve_split(A, b, cfg):
    """Two partial eigen-solves, largest-magnitude half then smallest-magnitude half.

    The large half comes from index-range solves of the ascending spectrum. The
    small half is solved in the orthogonal complement of the large half's
    eigenvectors, so a repeated eigenvalue on the boundary is never counted twice.
    A requested pair count is taken from the large half first.
    """
    A = check_symmetric(A)
    n = A.shape[0]
    check_requested_pairs(cfg.requested_pairs, n)
    pairs = n if cfg.requested_pairs is None else cfg.requested_pairs
    eigenvalues = scipy.linalg.eigvalsh(A)
    ranges_large, small = _magnitude_halves(eigenvalues)

    large = _partial_spectrum(A, ranges_large)
    large_count = min(pairs, large.count)
    x = apply_eigenpairs(large, b, _half_config(cfg, large_count))
    small_count = 0
    if small is not None and pairs > large.count:
        small_count = pairs - large.count
        x = x + apply_eigenpairs(_complement_spectrum(A, large.eigenvectors), b, _half_config(cfg, small_count))
    logger.info(f'split solve n={n}: {large_count} large + {small_count} small pairs')
    return x
