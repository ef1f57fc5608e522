"""Incremental Cholesky maintenance for the active-set Gram matrix.

The path solver grows and shrinks the factor of Q[A, A] one variable at a
time; a full refactorization is only done when an update's pivot falls
below the threshold the solver treats as rank deficiency.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular

#: squared-pivot floor below which an insert is refused as rank deficient
PIVOT_TOL = 1e-12


class PivotError(np.linalg.LinAlgError):
    """Raised when an insert/rebuild meets a nonpositive or tiny pivot."""


def chol_insert(L, col, diag):
    """Extend the lower factor L of G to the factor of [[G, col],[col', diag]].

    ``col`` holds the new variable's Gram column against the current active
    set (in factor order), ``diag`` its own Gram diagonal. Raises PivotError
    when the Schur complement pivot drops below PIVOT_TOL.
    """
    k = 0 if L is None else L.shape[0]
    if k == 0:
        if diag <= PIVOT_TOL:
            raise PivotError(f"pivot {diag:.3e} below tolerance")
        return np.array([[np.sqrt(diag)]])
    z = solve_triangular(L, col, lower=True, check_finite=False)
    d2 = diag - float(z @ z)
    if d2 <= PIVOT_TOL:
        raise PivotError(f"pivot {d2:.3e} below tolerance")
    out = np.zeros((k + 1, k + 1))
    out[:k, :k] = L
    out[k, :k] = z
    out[k, k] = np.sqrt(d2)
    return out


def chol_delete(L, i):
    """Factor of the Gram with variable ``i`` (factor order) removed.

    Deletes row/column i and restores triangularity of the trailing block
    with Givens rotations, the standard O(k^2) downdate.
    """
    k = L.shape[0]
    if k == 1:
        return None
    S = np.delete(L, i, axis=0)  # (k-1, k) with a spurious superdiagonal
    for j in range(i, k - 1):
        a, b = S[j, j], S[j, j + 1]
        r = np.hypot(a, b)
        if r == 0.0:
            raise PivotError("zero pivot during delete")
        cth, sth = a / r, b / r
        cols = np.array([S[j:, j].copy(), S[j:, j + 1].copy()])
        S[j:, j] = cth * cols[0] + sth * cols[1]
        S[j:, j + 1] = -sth * cols[0] + cth * cols[1]
        if S[j, j] < 0:
            S[j:, j] = -S[j:, j]
    return np.ascontiguousarray(S[:, : k - 1])


def chol_solve(L, b):
    """Solve G x = b given the lower Cholesky factor L of G."""
    z = solve_triangular(L, b, lower=True, check_finite=False)
    return solve_triangular(L.T, z, lower=False, check_finite=False)


def chol_rebuild(G):
    """Fresh factor of G; raises PivotError if G is not positive definite."""
    try:
        L = np.linalg.cholesky(G)
    except np.linalg.LinAlgError as e:
        raise PivotError(str(e)) from e
    if float(L.diagonal().min()) ** 2 <= PIVOT_TOL:
        raise PivotError("rebuilt factor has a pivot below tolerance")
    return L
