"""Sign-consistency diagnostics for a problem with known ground truth.

Everything here is a deterministic function of a covariance-like moment
matrix Q and the generating weights: the consistency condition (the dual
norm that decides whether l1 selection can recover the true support), the
local noiseless perturbation problem whose minimizer describes where the
selected sign pattern stabilizes, and the stability margin of that pattern.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .lasso import lasso_path_from_moments
from .types import (
    RANK_TOL,
    GroundTruth,
    InputError,
    MomentForm,
    RankDeficiencyError,
    support_of,
)

#: slack used both for tightness detection (|grad| within TIGHT_TOL of 1)
#: and for the strictness requirement of the stability check
TIGHT_TOL = 1e-9


@dataclass(frozen=True)
class DiagnosticsReport:
    """Outcome of the local-problem analysis for one (Q, truth) pair.

    ``delta`` is the minimizer of the local noiseless problem, and the
    extended/augmented supports and sign vector describe the pattern the
    penalized solution stabilizes onto. When the local problem could not be
    solved uniquely, the pattern fields are None and ``unicity_holds`` is
    False. ``theta`` is only filled by ``assumption_check`` when both
    checks pass.
    """

    cond_value: float
    cond_satisfied: bool
    cond_strict: bool
    relevant_support: frozenset[int]
    delta: np.ndarray | None
    extended_support: frozenset[int] | None
    augmented_support: frozenset[int] | None
    local_signs: np.ndarray | None
    unicity_holds: bool
    stability_norm: float | None
    stability_holds: bool
    theta: float | None = None

    def to_dict(self) -> dict:
        """JSON-ready view (variables reported 1-based)."""
        one = lambda s: None if s is None else [j + 1 for j in sorted(s)]
        return {
            "cond_value": self.cond_value,
            "cond_satisfied": self.cond_satisfied,
            "cond_strict": self.cond_strict,
            "relevant_support": one(self.relevant_support),
            "delta": None if self.delta is None else [float(v) for v in self.delta],
            "extended_support": one(self.extended_support),
            "augmented_support": one(self.augmented_support),
            "local_signs": (None if self.local_signs is None
                            else [int(v) for v in self.local_signs]),
            "unicity_holds": self.unicity_holds,
            "stability_norm": self.stability_norm,
            "stability_holds": self.stability_holds,
            "theta": self.theta,
        }


def _factor_block(Q, idx, what):
    try:
        return cho_factor(Q[np.ix_(idx, idx)], lower=True)
    except np.linalg.LinAlgError as e:
        raise RankDeficiencyError(f"{what} block is singular: {e}") from e


def consistency_condition(moments: MomentForm, truth: GroundTruth) -> float:
    """The dual norm ||Q_{J^c,J} Q_JJ^{-1} sign(w_J)||_inf.

    Selection can be sign-consistent only when this is at most 1; strict
    inequality is the classical sufficient condition. Empty J (or empty
    complement) makes the condition vacuous and returns 0.
    """
    if truth.p != moments.p:
        raise InputError(f"truth has p={truth.p}, moments have p={moments.p}")
    J = sorted(truth.support)
    Jc = truth.irrelevant()
    if not J or not Jc:
        return 0.0
    fac = _factor_block(moments.Q, J, "relevant-support Gram")
    x = cho_solve(fac, truth.signs[J].astype(float))
    return float(np.abs(moments.Q[np.ix_(Jc, J)] @ x).max())


def local_problem(moments: MomentForm, truth: GroundTruth) -> DiagnosticsReport:
    """Solve min (1/2)D'QD + D_J'sign(w_J) + ||D_{J^c}||_1 and classify it.

    Eliminating the J block turns the problem into an l1 problem in the
    off-support coordinates with Gram equal to the Schur complement and
    penalty exactly 1, which the path solver handles. The report carries
    the minimizer, the tight off-support set (coordinates active or on the
    subdifferential boundary |(QD)_j| = 1 within 1e-9), their union with J,
    and the sign vector that pattern-stabilization concentrates on.
    """
    Q = moments.Q
    p = moments.p
    cond = consistency_condition(moments, truth)  # also validates shapes/Q_JJ
    J = sorted(truth.support)
    Jc = truth.irrelevant()
    base = dict(cond_value=cond, cond_satisfied=cond <= 1.0,
                cond_strict=cond < 1.0, relevant_support=truth.support)
    if not J:
        return DiagnosticsReport(**base, delta=np.zeros(p),
                                 extended_support=frozenset(),
                                 augmented_support=frozenset(),
                                 local_signs=np.zeros(p, dtype=np.int8),
                                 unicity_holds=True, stability_norm=0.0,
                                 stability_holds=True)
    sbar = truth.signs[J].astype(float)
    fac_J = _factor_block(Q, J, "relevant-support Gram")
    t = np.zeros(p, dtype=np.int8)
    t[J] = truth.signs[J]
    if not Jc:
        delta = np.zeros(p)
        delta[J] = -cho_solve(fac_J, sbar)
        return DiagnosticsReport(**base, delta=delta,
                                 extended_support=frozenset(),
                                 augmented_support=truth.support,
                                 local_signs=t,
                                 unicity_holds=_block_invertible(Q, J),
                                 stability_norm=0.0, stability_holds=True)
    QJcJ = Q[np.ix_(Jc, J)]
    W = cho_solve(fac_J, Q[np.ix_(J, Jc)])
    schur = Q[np.ix_(Jc, Jc)] - QJcJ @ W
    schur = 0.5 * (schur + schur.T)
    eigs, vecs = np.linalg.eigh(schur)
    if eigs[0] < 0.0:
        # exact Schur complements of a PSD matrix are PSD; a rank-deficient
        # Q (n < p designs) leaves rounding-sized negative eigenvalues that
        # must be projected out before the reduced problem is posed
        schur = (vecs * np.maximum(eigs, 0.0)) @ vecs.T
        schur = 0.5 * (schur + schur.T)
    c_red = QJcJ @ cho_solve(fac_J, sbar)
    reduced = MomentForm(schur, c_red)
    path = lasso_path_from_moments(reduced, mu_floor=1.0)
    if path.coverage_floor > 1.0 + 1e-12:
        # the reduced problem lost uniqueness before the unit penalty
        return DiagnosticsReport(**base, delta=None, extended_support=None,
                                 augmented_support=None, local_signs=None,
                                 unicity_holds=False, stability_norm=None,
                                 stability_holds=False)
    d = path.weights_at(1.0)
    grad = reduced.Q @ d - reduced.c  # equals (Q delta) on the complement
    delta = np.zeros(p)
    delta[Jc] = d
    delta[J] = -cho_solve(fac_J, sbar + Q[np.ix_(J, Jc)] @ d)
    active = support_of(d)
    K = []
    for i, j in enumerate(Jc):
        if i in active or abs(abs(grad[i]) - 1.0) <= TIGHT_TOL:
            K.append(j)
            if i in active:
                t[j] = np.int8(np.sign(d[i]))
            else:
                # tight but inactive: carry the face the correlation sits on
                t[j] = np.int8(-np.sign(grad[i]))
    K_set = frozenset(K)
    L = sorted(set(J) | K_set)
    unicity = _block_invertible(Q, L)
    norm = _stability_norm(Q, L, t) if unicity else None
    return DiagnosticsReport(**base, delta=delta, extended_support=K_set,
                             augmented_support=frozenset(L), local_signs=t,
                             unicity_holds=unicity, stability_norm=norm,
                             stability_holds=(norm is not None
                                              and norm < 1.0 - TIGHT_TOL))


def _block_invertible(Q, idx) -> bool:
    if not idx:
        return True
    eigs = np.linalg.eigvalsh(Q[np.ix_(idx, idx)])
    return float(eigs[0]) > RANK_TOL * max(1.0, float(eigs[-1]))


def _stability_norm(Q, L, t) -> float:
    """||Q_{L^c,L} Q_LL^{-1} t_L||_inf, 0 when L^c is empty."""
    p = Q.shape[0]
    Lc = [j for j in range(p) if j not in set(L)]
    if not Lc:
        return 0.0
    if not L:
        return 0.0
    fac = _factor_block(Q, list(L), "augmented-support Gram")
    z = cho_solve(fac, np.asarray(t, dtype=float)[list(L)])
    return float(np.abs(Q[np.ix_(Lc, list(L))] @ z).max())


def stability_theta(moments: MomentForm, report: DiagnosticsReport) -> float:
    """Margin by which the stabilized pattern is locally persistent.

    theta = min( 1 - ||Q_{L^c,L} Q_LL^{-1} t_L||_inf ,
                 min_{k in tight set} |(Q_LL^{-1} t_L)_k| * Q_kk ),
    dropping whichever term has an empty index set; an error when both are
    empty or when Q_LL is singular.
    """
    if report.augmented_support is None or report.local_signs is None:
        raise InputError("report does not carry a resolved local problem")
    Q = moments.Q
    L = sorted(report.augmented_support)
    K = sorted(report.extended_support)
    Lc = [j for j in range(moments.p) if j not in set(L)]
    if not Lc and not K:
        raise InputError("stability margin undefined: "
                         "no off-support coordinates and no tight set")
    terms = []
    if L:
        fac = _factor_block(Q, L, "augmented-support Gram")
        z = cho_solve(fac, report.local_signs[L].astype(float))
    else:
        z = np.zeros(0)
    if Lc:
        proj = Q[np.ix_(Lc, L)] @ z if L else np.zeros(len(Lc))
        terms.append(1.0 - float(np.abs(proj).max()))
    if K:
        pos = {j: i for i, j in enumerate(L)}
        terms.append(min(abs(float(z[pos[k]])) * float(Q[k, k]) for k in K))
    return min(terms)


def assumption_check(moments: MomentForm, truth: GroundTruth) -> DiagnosticsReport:
    """Full report: local problem, both high-dimensional checks, margin.

    ``unicity_holds`` is the invertibility of the augmented-support Gram
    block at the rank tolerance; ``stability_holds`` is the strict dual
    bound over its complement. The margin theta is computed only when both
    hold (it is then positive).
    """
    report = local_problem(moments, truth)
    if report.unicity_holds and report.stability_holds:
        try:
            theta = stability_theta(moments, report)
        except InputError:
            theta = None
        return replace(report, theta=theta)
    return report
