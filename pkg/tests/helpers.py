import numpy as np


def random_spd(n, condition=100.0, seed=0):
    """Symmetric positive definite matrix with eigenvalues spread over [1, condition]"""
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    eigenvalues = np.logspace(0, np.log10(condition), n)
    A = (q * eigenvalues) @ q.T
    return (A + A.T) / 2


def relative_error(actual, expected):
    expected = np.asarray(expected)
    scale = np.abs(expected).max()
    return float(np.abs(np.asarray(actual) - expected).max() / scale) if scale else float(np.abs(actual).max())
