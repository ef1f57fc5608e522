"""Core containers: datasets, moment forms, ground truth, shared tolerances."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

#: relative eigenvalue threshold below which a Gram block counts as singular
RANK_TOL = 1e-10
#: coefficients below 1e-12 * max(1, ||w||_inf) are treated as exact zeros
ZERO_REL_TOL = 1e-12
#: largest KKT residual a solver-produced solution is allowed to carry
KKT_EMIT_TOL = 1e-8


class InputError(ValueError):
    """Raised when an argument fails a documented precondition."""


class RankDeficiencyError(np.linalg.LinAlgError):
    """Raised when a required Gram block is singular at the rank tolerance."""


class CoverageError(ValueError):
    """Raised when a path is queried below its covered penalty range."""


def _as_locked(a, name, ndim):
    arr = np.asarray(a, dtype=float)
    if arr.ndim != ndim:
        raise InputError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise InputError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite entries")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Dataset:
    """A fixed design/response pair (X, y); arrays are locked on construction."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = _as_locked(self.X, "X", 2)
        y = _as_locked(self.y, "y", 1)
        if X.shape[0] != y.shape[0]:
            raise InputError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def row_bound(self) -> float:
        """max_i ||x_i||_inf, the uniform bound on design entries."""
        return float(np.abs(self.X).max())


@dataclass(frozen=True)
class MomentForm:
    """Second-moment data (Q, c) of an l1 problem, with rank information.

    Represents min_w (1/2) w'Qw - c'w + mu*||w||_1. For a dataset this is
    Q = X'X/n and c = X'y/n; diagnostics also build these directly from a
    population covariance.
    """

    Q: np.ndarray
    c: np.ndarray
    lambda_min: float = field(init=False)
    full_rank: bool = field(init=False)

    def __post_init__(self):
        Q = _as_locked(self.Q, "Q", 2)
        c = _as_locked(self.c, "c", 1)
        if Q.shape[0] != Q.shape[1]:
            raise InputError(f"Q must be square, got shape {Q.shape}")
        if Q.shape[0] != c.shape[0]:
            raise InputError(f"Q is {Q.shape[0]}x{Q.shape[0]} but c has length {c.shape[0]}")
        scale = max(1.0, float(np.abs(Q).max()))
        if np.abs(Q - Q.T).max() > 1e-10 * scale:
            raise InputError("Q is not symmetric within 1e-10 (relative)")
        eigs = np.linalg.eigvalsh(Q)
        if eigs[0] < -1e-8 * scale:
            raise InputError(f"Q is not positive semidefinite (lambda_min={eigs[0]:.3e})")
        lam = max(float(eigs[0]), 0.0)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "lambda_min", lam)
        object.__setattr__(self, "full_rank", lam > RANK_TOL * max(1.0, float(eigs[-1])))

    @property
    def p(self) -> int:
        return self.Q.shape[0]


def compute_moments(data: Dataset) -> MomentForm:
    """Empirical moment form Q = X'X/n, c = X'y/n of a dataset."""
    n = data.n
    Q = data.X.T @ data.X / n
    Q = 0.5 * (Q + Q.T)
    c = data.X.T @ data.y / n
    return MomentForm(Q, c)


def support_of(w, zero_tol=None) -> frozenset[int]:
    """Indices of entries that are nonzero at the shared zero threshold."""
    w = np.asarray(w, dtype=float)
    if zero_tol is None:
        zero_tol = ZERO_REL_TOL * max(1.0, float(np.abs(w).max()) if w.size else 1.0)
    return frozenset(int(j) for j in np.flatnonzero(np.abs(w) > zero_tol))


def sign_pattern(w, zero_tol=None) -> np.ndarray:
    """Elementwise sign in {-1,0,+1}, zeroing entries below the threshold."""
    w = np.asarray(w, dtype=float)
    if zero_tol is None:
        zero_tol = ZERO_REL_TOL * max(1.0, float(np.abs(w).max()) if w.size else 1.0)
    s = np.sign(w).astype(np.int8)
    s[np.abs(w) <= zero_tol] = 0
    return s


@dataclass(frozen=True)
class GroundTruth:
    """The generating weight vector and everything selection is judged against."""

    weights: np.ndarray
    support: frozenset[int] = field(init=False)
    signs: np.ndarray = field(init=False)
    min_magnitude: float = field(init=False)

    def __post_init__(self):
        w = _as_locked(self.weights, "weights", 1)
        object.__setattr__(self, "weights", w)
        sup = support_of(w, zero_tol=0.0)
        signs = np.sign(w).astype(np.int8)
        signs.flags.writeable = False
        object.__setattr__(self, "support", sup)
        object.__setattr__(self, "signs", signs)
        mags = np.abs(w[sorted(sup)])
        object.__setattr__(self, "min_magnitude", float(mags.min()) if sup else 0.0)

    @property
    def p(self) -> int:
        return self.weights.shape[0]

    def irrelevant(self) -> list[int]:
        """Complement of the support, sorted."""
        return [j for j in range(self.p) if j not in self.support]
