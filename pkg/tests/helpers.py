"""Shared random-problem builders for the test suite."""

import numpy as np

from bolasso import Dataset


def random_dataset(rng, n, p, *, k=None, sigma=0.1, duplicate_col=False):
    """Gaussian design, sparse truth, optional duplicated column.

    Returns (Dataset, true_weights).
    """
    X = rng.standard_normal((n, p))
    if duplicate_col and p >= 2:
        X[:, -1] = X[:, 0]
    if k is None:
        k = max(1, p // 3)
    w = np.zeros(p)
    idx = rng.choice(p, size=k, replace=False)
    w[idx] = rng.uniform(0.5, 2.0, size=k) * rng.choice([-1.0, 1.0], size=k)
    y = X @ w + sigma * rng.standard_normal(n)
    return Dataset(X, y), w


def random_correlation(rng, p):
    """Random SPD matrix with unit diagonal (for diagnostics tests)."""
    A = rng.standard_normal((p, 2 * p))
    S = A @ A.T / (2 * p)
    d = np.sqrt(np.diag(S))
    S = S / np.outer(d, d)
    return 0.5 * (S + S.T)
