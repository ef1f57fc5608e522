"""Piecewise-linear l1 regularization paths in second-moment form.

The solver works on (Q, c) with objective

    min_w  (1/2) w'Qw - c'w + mu*||w||_1

and traces the exact solution path in the penalty mu by the usual
active-set homotopy: within a segment the solution is affine in mu, and
breakpoints occur where an inactive correlation reaches the penalty or an
active coefficient crosses zero. The engine additionally allows the linear
term itself to be affine in mu, c(mu) = c0 + mu*c1, which is what a
residual-resampled problem looks like inside one segment of its base path;
that makes a whole replicate path cost one homotopy run instead of one
solve per penalty value.

Every emitted segment is self-checked against the optimality conditions at
its endpoints; a failed check, a singular active Gram block, or an active
set about to exceed ``max_active`` terminates the path early, and querying
below the covered range raises instead of silently returning one of many
minimizers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cholesky import PivotError, chol_delete, chol_insert, chol_rebuild, chol_solve
from .types import (
    CoverageError,
    Dataset,
    InputError,
    MomentForm,
    RankDeficiencyError,
    compute_moments,
    sign_pattern,
    support_of,
)

#: relative tolerance for merging near-coincident breakpoint events
EVENT_GUARD_REL = 1e-11
#: stationarity slack allowed on the active block before a factor rebuild
STATIONARITY_TOL = 5e-9
#: feasibility slack allowed on inactive correlations at a segment start
FEASIBILITY_TOL = 1e-9

TERMINATION_COMPLETE = "complete"
TERMINATION_MAX_ACTIVE = "max_active"
TERMINATION_DEGENERATE = "degenerate"


@dataclass(frozen=True)
class PathSegment:
    """One maximal interval [mu_low, mu_high] with a fixed active set.

    ``intercept`` and ``slope`` give the active coefficients in the order of
    ``active``: w_active(mu) = intercept + mu * slope.
    """

    mu_high: float
    mu_low: float
    active: tuple[int, ...]
    signs: tuple[int, ...]
    intercept: np.ndarray
    slope: np.ndarray

    def weights(self, mu: float, p: int) -> np.ndarray:
        w = np.zeros(p)
        if self.active:
            w[list(self.active)] = self.intercept + mu * self.slope
        return w


@dataclass(frozen=True)
class RegularizationPath:
    """A traced path: decreasing breakpoints and one segment per interval.

    ``breakpoints[0]`` is the largest penalty at which the solution becomes
    (or stops being) identically zero; the solution is zero for all larger
    penalties. ``segments[i]`` covers [breakpoints[i+1], breakpoints[i]].
    A path that did not reach mu = 0 records why in ``termination``.
    """

    p: int
    mu_max: float
    breakpoints: np.ndarray
    segments: tuple[PathSegment, ...]
    termination: str
    moments: MomentForm | None = None

    @property
    def terminated_degenerate(self) -> bool:
        return self.termination == TERMINATION_DEGENERATE

    @property
    def coverage_floor(self) -> float:
        """Smallest penalty the path covers (0.0 for a full complete path)."""
        return float(self.breakpoints[-1])

    def _segment_index(self, mu: float) -> int:
        bp = self.breakpoints
        idx = int(np.searchsorted(-bp, -mu, side="right")) - 1
        return min(max(idx, 0), len(self.segments) - 1)

    def weights_at(self, mu: float) -> np.ndarray:
        """Exact solution at penalty ``mu`` (errors below the covered range)."""
        if not np.isfinite(mu) or mu < 0:
            raise InputError(f"mu must be a finite nonnegative number, got {mu}")
        floor = self.coverage_floor
        if mu < floor - 1e-12 * max(1.0, floor):
            raise CoverageError(
                f"mu={mu:g} is below the covered range [{floor:g}, inf); "
                f"path terminated '{self.termination}'")
        mu = max(mu, floor)
        if not self.segments or mu >= self.breakpoints[0]:
            return np.zeros(self.p)
        return self.segments[self._segment_index(mu)].weights(mu, self.p)

    def support_at(self, mu: float, clamp_to_floor: bool = False) -> frozenset[int]:
        """Support of the solution at ``mu``.

        With ``clamp_to_floor`` a query below the covered range returns the
        support at the coverage floor (the last uniquely determined one)
        instead of raising.
        """
        if clamp_to_floor:
            mu = max(mu, self.coverage_floor)
        return support_of(self.weights_at(mu))


@dataclass(frozen=True)
class LassoSolution:
    """Solution at a single penalty, with its subdifferential certificate.

    ``subgradient`` is the vector g = (c - Qw)/mu: it satisfies
    ||g||_inf <= 1, equals the coefficient sign on the support, and makes
    the stationarity identity Qw - c + mu*g = 0 hold. At mu = 0 the sign
    pattern is stored (stationarity there is Qw = c on its own).
    """

    mu: float
    weights: np.ndarray
    support: frozenset[int]
    signs: np.ndarray
    subgradient: np.ndarray


class _State:
    """Mutable homotopy state: active list, signs, Cholesky factor."""

    __slots__ = ("active", "signs", "L")

    def __init__(self):
        self.active: list[int] = []
        self.signs: list[int] = []
        self.L = None


def _advance_window(Q, c0, c1, hi, lo, state, segments, max_active):
    """Trace the path from ``hi`` down to ``lo`` with c(mu) = c0 + mu*c1.

    Appends emitted segments and mutates ``state`` in place. Returns
    (status, floor) where status is "ok" once ``lo`` is reached and floor
    the penalty where construction stopped otherwise. An infinite ``hi``
    is allowed only with c1 = None (constant linear term).
    """
    p = Q.shape[0]
    use_c1 = c1 is not None
    if hi <= lo:
        return "ok", lo
    events = 0
    while True:
        A = state.active
        k = len(A)
        if k:
            s_arr = np.asarray(state.signs, dtype=float)
            rhs_v = (c1[A] - s_arr) if use_c1 else -s_arr
            u = chol_solve(state.L, c0[A])
            v = chol_solve(state.L, rhs_v)
            QAA = Q[np.ix_(A, A)]
            r0 = QAA @ u - c0[A]
            r1 = QAA @ v - rhs_v
            err = float(np.abs(r0 + hi * r1).max())
            err = max(err, float(np.abs(r0 + lo * r1).max()))
            if err > STATIONARITY_TOL * max(1.0, hi):
                try:
                    state.L = chol_rebuild(QAA)
                except PivotError:
                    return TERMINATION_DEGENERATE, hi
                u = chol_solve(state.L, c0[A])
                v = chol_solve(state.L, rhs_v)
                r0 = QAA @ u - c0[A]
                r1 = QAA @ v - rhs_v
                err = float(np.abs(r0 + hi * r1).max())
                err = max(err, float(np.abs(r0 + lo * r1).max()))
                if err > STATIONARITY_TOL * max(1.0, hi):
                    return TERMINATION_DEGENERATE, hi
        else:
            u = v = np.zeros(0)

        mask = np.ones(p, dtype=bool)
        if k:
            mask[A] = False
        I = np.flatnonzero(mask)
        cand_mu = -np.inf
        cand_entries: list[tuple[float, int, int]] = []
        cand_removals: list[tuple[float, int]] = []
        if I.size:
            if k:
                QIA = Q[np.ix_(I, A)]
                a = c0[I] - QIA @ u
                b = (c1[I] if use_c1 else 0.0) - QIA @ v
            else:
                a = c0[I].copy()
                b = c1[I].copy() if use_c1 else np.zeros(I.size)
            if np.isfinite(hi):
                slack = np.abs(a + hi * b) - hi
                if float(slack.max()) > FEASIBILITY_TOL * max(1.0, hi):
                    return TERMINATION_DEGENERATE, hi
                upper = hi - EVENT_GUARD_REL * max(1.0, hi)
            else:
                upper = np.inf
            with np.errstate(divide="ignore", invalid="ignore"):
                mu_plus = a / (1.0 - b)
                mu_minus = -a / (1.0 + b)
            for arr, face in ((mu_plus, 1), (mu_minus, -1)):
                ok = np.isfinite(arr) & (arr > lo) & (arr > 0.0) & (arr < upper)
                for pos in np.flatnonzero(ok):
                    cand = float(arr[pos])
                    cand_entries.append((cand, int(I[pos]), face))
                    cand_mu = max(cand_mu, cand)
        if k:
            upper_r = hi - EVENT_GUARD_REL * max(1.0, hi) if np.isfinite(hi) else np.inf
            with np.errstate(divide="ignore", invalid="ignore"):
                mu_rem = -u / v
            ok = np.isfinite(mu_rem) & (mu_rem > lo) & (mu_rem > 0.0) & (mu_rem < upper_r)
            for pos in np.flatnonzero(ok):
                cand = float(mu_rem[pos])
                cand_removals.append((cand, int(pos)))
                cand_mu = max(cand_mu, cand)

        seg_end = lo if cand_mu == -np.inf else cand_mu
        if k:
            # active coefficients must keep their assumed signs on the
            # emitted segment; a flip at an endpoint means a removal event
            # was missed (k > 0 only after the first event, so hi is finite)
            w_hi = u + hi * v
            w_end = u + seg_end * v
            scale_w = max(1.0, float(np.abs(w_hi).max()),
                          float(np.abs(w_end).max()))
            if np.any(w_hi * s_arr < -1e-9 * scale_w) or \
                    np.any(w_end * s_arr < -1e-9 * scale_w):
                return TERMINATION_DEGENERATE, hi
        if cand_mu == -np.inf:
            if k or np.isfinite(hi):
                segments.append(PathSegment(float(hi), float(lo), tuple(A),
                                            tuple(state.signs), u.copy(), v.copy()))
            return "ok", lo

        next_mu = cand_mu
        if k or np.isfinite(hi):
            segments.append(PathSegment(float(hi), float(next_mu), tuple(A),
                                        tuple(state.signs), u.copy(), v.copy()))
        tie = EVENT_GUARD_REL * max(1.0, next_mu)
        rem_positions = sorted({pos for cand, pos in cand_removals
                                if cand >= next_mu - tie}, reverse=True)
        enters: dict[int, int] = {}
        for cand, j, face in cand_entries:
            if cand >= next_mu - tie and j not in enters:
                enters[j] = face
        for pos in rem_positions:
            state.L = chol_delete(state.L, pos)
            state.active.pop(pos)
            state.signs.pop(pos)
        if enters:
            if len(state.active) + len(enters) > max_active:
                return TERMINATION_MAX_ACTIVE, next_mu
            for j, face in sorted(enters.items()):
                col = Q[state.active, j] if state.active else np.zeros(0)
                try:
                    state.L = chol_insert(state.L, col, float(Q[j, j]))
                except PivotError:
                    hold = state.active + [j]
                    try:
                        state.L = chol_rebuild(Q[np.ix_(hold, hold)])
                    except PivotError:
                        return TERMINATION_DEGENERATE, next_mu
                state.active.append(j)
                state.signs.append(face)
        hi = next_mu
        events += 1
        if events > 200 * p + 1000:
            return TERMINATION_DEGENERATE, hi


def _assemble(p, mu_max, segments, status, floor, moments):
    term = TERMINATION_COMPLETE if status == "ok" else status
    if not segments:
        return RegularizationPath(p, mu_max, np.array([float(floor)]), (),
                                  term, moments)
    bp = np.array([segments[0].mu_high] + [s.mu_low for s in segments])
    return RegularizationPath(p, mu_max, bp, tuple(segments), term, moments)


def lasso_path_from_moments(moments: MomentForm, max_active: int | None = None,
                            mu_floor: float = 0.0) -> RegularizationPath:
    """Trace the path of min (1/2)w'Qw - c'w + mu*||w||_1 over mu.

    The path starts at mu_max = ||c||_inf (above which the solution is
    identically zero) and runs down to ``mu_floor`` (default 0), stopping
    early if the active set would exceed ``max_active`` or the active Gram
    block goes singular. Termination "complete" means the floor was reached.
    """
    if max_active is None:
        max_active = moments.p
    if max_active < 1:
        raise InputError(f"max_active must be at least 1, got {max_active}")
    if mu_floor < 0:
        raise InputError(f"mu_floor must be nonnegative, got {mu_floor}")
    mu_max = float(np.abs(moments.c).max())
    if mu_max == 0.0:
        return RegularizationPath(moments.p, 0.0, np.array([0.0]), (),
                                  TERMINATION_COMPLETE, moments)
    state = _State()
    segments: list[PathSegment] = []
    status, floor = _advance_window(moments.Q, moments.c, None, np.inf, mu_floor,
                                    state, segments, max_active)
    return _assemble(moments.p, mu_max, segments, status, floor, moments)


def lasso_path(data: Dataset, max_active: int | None = None) -> RegularizationPath:
    """Regularization path of the dataset's empirical moment form."""
    return lasso_path_from_moments(compute_moments(data), max_active)


def solve_at(path: RegularizationPath, mu: float) -> LassoSolution:
    """Solution (with support, signs and subgradient) at one penalty value."""
    if path.moments is None:
        raise InputError("path carries no moment form; use weights_at instead")
    w = path.weights_at(mu)
    if mu > 0:
        g = (path.moments.c - path.moments.Q @ w) / mu
    else:
        g = sign_pattern(w).astype(float)
    return LassoSolution(mu=float(mu), weights=w, support=support_of(w),
                         signs=sign_pattern(w), subgradient=g)


def kkt_check(data, mu: float, w) -> float:
    """Largest optimality-condition violation of ``w`` at penalty ``mu``.

    On the support this is the stationarity residual
    |(Qw - c)_j + mu*sign(w_j)|; off it, the excess max(0, |(Qw-c)_j| - mu).
    ``data`` may be a Dataset or a MomentForm.
    """
    moments = compute_moments(data) if isinstance(data, Dataset) else data
    if mu < 0:
        raise InputError(f"mu must be nonnegative, got {mu}")
    w = np.asarray(w, dtype=float)
    if w.shape != (moments.p,):
        raise InputError(f"w has shape {w.shape}, expected ({moments.p},)")
    g = moments.Q @ w - moments.c
    signs = sign_pattern(w)
    on = signs != 0
    viol = 0.0
    if np.any(on):
        viol = float(np.abs(g[on] + mu * signs[on]).max())
    if np.any(~on):
        viol = max(viol, max(0.0, float(np.abs(g[~on]).max()) - mu))
    return viol


def refit_ols(data: Dataset, support) -> np.ndarray:
    """Least-squares refit of ``data`` on the given support, embedded in R^p.

    An empty support yields the zero vector; a column-rank-deficient
    restriction raises with the offending support in the message.
    """
    cols = sorted(int(j) for j in support)
    w = np.zeros(data.p)
    if not cols:
        return w
    if any(j < 0 or j >= data.p for j in cols):
        raise InputError(f"support {cols} out of range for p={data.p}")
    Xs = data.X[:, cols]
    coef, _, rank, _ = np.linalg.lstsq(Xs, data.y, rcond=None)
    if rank < len(cols):
        raise RankDeficiencyError(
            f"design restricted to support {cols} has column rank {rank}")
    w[cols] = coef
    return w


def error_bound(moments: MomentForm, mu: float, q_norm: float) -> float:
    """Deterministic l2 bound on the estimation error of the solution.

    For a full-rank moment form, any solution at penalty mu satisfies
    ||w_hat - w_bar||_2 <= (sqrt(p)*mu + ||q||_2) / lambda_min(Q), where q
    is the noise moment vector X'eps/n. Raises on rank-deficient Q.
    """
    if mu < 0 or q_norm < 0:
        raise InputError("mu and q_norm must be nonnegative")
    if not moments.full_rank:
        raise RankDeficiencyError(
            f"error bound needs a full-rank Q (lambda_min={moments.lambda_min:.3e})")
    return (np.sqrt(moments.p) * mu + q_norm) / moments.lambda_min


class ResidualPathFactory:
    """Replicate paths for residual resampling, one stitched run per draw.

    The base fit's residual vector and fitted values are affine in mu inside
    each base-path segment, so a resampled problem's linear term is too:
    c*(mu) = Q w_hat(mu) + X'(eps_hat(mu))_{i*}/n = c0 + mu*c1 per segment.
    ``paths`` runs the homotopy through those windows in sequence, giving
    each replication one path valid on the whole covered penalty range.
    """

    def __init__(self, data: Dataset, moments: MomentForm | None = None,
                 base_path: RegularizationPath | None = None,
                 max_active: int | None = None):
        self.data = data
        self.moments = moments if moments is not None else compute_moments(data)
        self.max_active = max_active if max_active is not None else data.p
        self.base = (base_path if base_path is not None
                     else lasso_path_from_moments(self.moments, self.max_active))
        X, y, n = data.X, data.y, data.n
        top_lo = float(self.base.breakpoints[0])
        e0 = y - y.mean()
        regions = [(np.inf, top_lo, e0, None, np.zeros(data.p), None)]
        for seg in self.base.segments:
            cols = list(seg.active)
            xa = X[:, cols] if cols else np.zeros((n, 0))
            xw0 = xa @ seg.intercept
            xw1 = xa @ seg.slope
            e0 = y - xw0
            e1 = -xw1
            regions.append((seg.mu_high, seg.mu_low,
                            e0 - e0.mean(), e1 - e1.mean(),
                            X.T @ xw0 / n, X.T @ xw1 / n))
        self._regions = regions

    def paths(self, indices: np.ndarray) -> list[RegularizationPath]:
        """One stitched path per row of ``indices`` (each row an n-vector).

        Row k holds the resampled observation indices of replication k.
        """
        indices = np.asarray(indices)
        if indices.ndim == 1:
            indices = indices[None, :]
        m = indices.shape[0]
        X, n = self.data.X, self.data.n
        per_region = []
        for (hi, lo, e0, e1, qw0, qw1) in self._regions:
            C0 = e0[indices] @ X / n + qw0
            C1 = None if e1 is None else e1[indices] @ X / n + qw1
            per_region.append((hi, lo, C0, C1))
        out = []
        for k in range(m):
            state = _State()
            segments: list[PathSegment] = []
            status, floor = "ok", self.base.coverage_floor
            for (hi, lo, C0, C1) in per_region:
                c1k = None if C1 is None else C1[k]
                status, floor = _advance_window(self.moments.Q, C0[k], c1k,
                                                hi, lo, state, segments,
                                                self.max_active)
                if status != "ok":
                    break
            if status == "ok" and self.base.termination != TERMINATION_COMPLETE:
                status = self.base.termination
            mu_max = segments[0].mu_high if segments else floor
            out.append(_assemble(self.data.p, float(mu_max), segments,
                                 status, floor, None))
        return out
