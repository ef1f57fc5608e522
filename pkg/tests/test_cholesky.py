"""Incremental Cholesky maintenance against full refactorization."""

import numpy as np
import pytest

from bolasso.cholesky import (
    PivotError,
    chol_delete,
    chol_insert,
    chol_rebuild,
    chol_solve,
)
from helpers import random_correlation


def _factor_matches(L, G, tol=1e-9):
    np.testing.assert_allclose(L @ L.T, G, atol=tol * max(1.0, np.abs(G).max()))


def test_insert_grows_factor():
    rng = np.random.default_rng(3)
    G = random_correlation(rng, 6) + 0.5 * np.eye(6)
    L = None
    for k in range(6):
        L = chol_insert(L, G[:k, k], G[k, k])
        _factor_matches(L, G[: k + 1, : k + 1])


def test_delete_matches_rebuild():
    rng = np.random.default_rng(4)
    G = random_correlation(rng, 7) + 0.5 * np.eye(7)
    L = chol_rebuild(G)
    for i in (3, 0, 4):  # middle, first, last of the shrinking factor
        keep = list(range(L.shape[0]))
        keep.pop(i)
        G = G[np.ix_(keep, keep)]
        L = chol_delete(L, i)
        _factor_matches(L, G)


def test_delete_last_variable_returns_none():
    L = chol_insert(None, np.zeros(0), 2.0)
    assert chol_delete(L, 0) is None


def test_random_insert_delete_walk():
    rng = np.random.default_rng(5)
    p = 10
    G_full = random_correlation(rng, p) + 0.3 * np.eye(p)
    active = []
    L = None
    for _ in range(60):
        if active and (len(active) == p or rng.random() < 0.4):
            i = int(rng.integers(len(active)))
            active.pop(i)
            L = chol_delete(L, i)
        else:
            j = int(rng.choice([v for v in range(p) if v not in active]))
            L = chol_insert(L, G_full[np.ix_(active, [j])].ravel(), G_full[j, j])
            active.append(j)
        if active:
            _factor_matches(L, G_full[np.ix_(active, active)])
        else:
            assert L is None


def test_insert_rejects_dependent_column():
    G = np.array([[1.0, 1.0], [1.0, 1.0]])  # second variable is a twin
    L = chol_insert(None, np.zeros(0), G[0, 0])
    with pytest.raises(PivotError):
        chol_insert(L, G[:1, 1], G[1, 1])


def test_rebuild_rejects_indefinite():
    with pytest.raises(PivotError):
        chol_rebuild(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_chol_solve():
    rng = np.random.default_rng(6)
    G = random_correlation(rng, 5) + 0.5 * np.eye(5)
    L = chol_rebuild(G)
    b = rng.standard_normal(5)
    np.testing.assert_allclose(chol_solve(L, b), np.linalg.solve(G, b),
                               atol=1e-11)
