"""Independent reference solvers used to cross-check the package.

Everything in this module is deliberately written with a different method
than the library under test: the l1 solver is an accelerated proximal
gradient iteration with a duality-gap certificate (the library uses a
homotopy), and the local noiseless problem is solved by exhaustive
enumeration of sign patterns (the library reduces it to a penalized
subproblem). Keeping the routes disjoint is what makes agreement evidence.
"""

from __future__ import annotations

import itertools

import numpy as np


def soft_threshold(z, t):
    """Elementwise soft-thresholding operator."""
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def prox_gradient_lasso(X, y, mu, gap_tol=1e-10, max_iter=200_000):
    """Solve min_w (1/2n)||y - Xw||^2 + mu*||w||_1 by FISTA.

    Runs until the primal-dual gap certificate drops below ``gap_tol``
    (absolute). Returns (w, gap). Raises RuntimeError if the budget is
    exhausted, so a silent low-accuracy answer can never leak into a test.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    n, p = X.shape
    # Lipschitz constant of the smooth part w -> X^T(Xw - y)/n.
    lip = float(np.linalg.eigvalsh(X.T @ X / n)[-1])
    if lip <= 0.0:
        return np.zeros(p), 0.0
    step = 1.0 / lip
    w = np.zeros(p)
    z = w.copy()
    t_acc = 1.0
    for it in range(max_iter):
        r = y - X @ z
        grad = -(X.T @ r) / n
        w_new = soft_threshold(z - step * grad, step * mu)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_acc * t_acc))
        z = w_new + ((t_acc - 1.0) / t_new) * (w_new - w)
        w, t_acc = w_new, t_new
        if it % 10 == 0 or it == max_iter - 1:
            gap = lasso_duality_gap(X, y, mu, w)
            if gap <= gap_tol:
                return w, gap
            if it % 1000 == 999:
                # FISTA is not monotone; restart momentum periodically.
                z = w.copy()
                t_acc = 1.0
    raise RuntimeError(f"prox gradient did not certify gap<={gap_tol} "
                       f"in {max_iter} iterations (last gap {gap:.3e})")


def lasso_duality_gap(X, y, mu, w):
    """Absolute duality gap of w for min (1/2n)||y-Xw||^2 + mu*||w||_1.

    The dual point is the scaled residual nu = s*r/n with
    s = min(1, n*mu/||X^T r||_inf), feasible for the constraint
    ||X^T nu||_inf <= mu; D(nu) = nu^T y - (n/2)||nu||^2.
    """
    n = X.shape[0]
    r = y - X @ w
    primal = 0.5 * float(r @ r) / n + mu * float(np.abs(w).sum())
    corr = X.T @ r
    cmax = float(np.abs(corr).max()) if corr.size else 0.0
    scale = 1.0 if cmax <= n * mu else n * mu / cmax
    nu = scale * r / n
    dual = float(nu @ y) - 0.5 * n * float(nu @ nu)
    return primal - dual


def certified_lasso_oracle(X, y, mu, gap_tol=1e-10):
    """Reference solution accurate in coordinates, not just in objective.

    The duality gap only controls the coordinate error as sqrt(2*gap/lam),
    so a gap of 1e-10 can leave ~1e-5 on a coordinate. This runs FISTA to
    ``gap_tol``, reads a candidate support off the iterate at a few
    thresholds, solves the stationarity system on that support, and accepts
    the polished point only if it passes the full KKT conditions at 1e-10.
    Falls back to a tighter FISTA run, then to the raw iterate.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    n, p = X.shape
    Q = X.T @ X / n
    c = X.T @ y / n
    w, _ = prox_gradient_lasso(X, y, mu, gap_tol=gap_tol)
    for _ in range(2):
        scale = max(1.0, float(np.abs(w).max()))
        for tau in (1e-4, 1e-6, 1e-9):
            S = np.flatnonzero(np.abs(w) > tau * scale)
            cand = np.zeros(p)
            if S.size:
                s = np.sign(w[S])
                try:
                    cand[S] = np.linalg.solve(Q[np.ix_(S, S)], c[S] - mu * s)
                except np.linalg.LinAlgError:
                    continue
            if moment_kkt_residual(Q, c, mu, cand) <= 1e-10:
                return cand
        w, _ = prox_gradient_lasso(X, y, mu, gap_tol=gap_tol * 1e-3,
                                   max_iter=2_000_000)
    return w


def moment_kkt_residual(Q, c, mu, w, zero_tol=None):
    """KKT residual of w for min (1/2)w'Qw - c'w + mu*||w||_1.

    Independent restatement of the optimality conditions used to judge
    solver output: stationarity on the support, box constraint off it.
    """
    w = np.asarray(w, dtype=float)
    if zero_tol is None:
        zero_tol = 1e-12 * max(1.0, float(np.abs(w).max()) if w.size else 1.0)
    g = Q @ w - c
    res = 0.0
    for j in range(w.size):
        if abs(w[j]) > zero_tol:
            res = max(res, abs(g[j] + mu * np.sign(w[j])))
        else:
            res = max(res, max(0.0, abs(g[j]) - mu))
    return res


def enumerate_local_problem(Q, relevant, sign_rel):
    """Exhaustively solve the noiseless perturbation problem.

    min_D (1/2) D'QD + D_J' s_J + ||D_{J^c}||_1  over D in R^p,
    where J = ``relevant`` and s_J = ``sign_rel``. Every sign pattern sigma
    in {-1,0,+1}^{J^c} is tried: the candidate solves the equality-
    constrained stationarity system on B = J u supp(sigma) and is kept iff
    it satisfies the full KKT conditions. Only feasible for small p.

    Returns (delta, tight) where tight is the set of j in J^c with
    |(Q delta)_j| = 1 up to 1e-9 (active or on the subdifferential
    boundary). Raises if no pattern certifies, or if two distinct
    certified minimizers disagree by more than 1e-8 (non-unique).
    """
    Q = np.asarray(Q, dtype=float)
    p = Q.shape[0]
    J = sorted(relevant)
    Jc = [j for j in range(p) if j not in set(J)]
    s_full = np.zeros(p)
    s_full[J] = sign_rel
    found = None
    for sigma in itertools.product((-1, 0, 1), repeat=len(Jc)):
        act = [j for j, s in zip(Jc, sigma) if s != 0]
        B = J + act
        t = np.concatenate([s_full[J], [s for s in sigma if s != 0]])
        QBB = Q[np.ix_(B, B)]
        try:
            dB = np.linalg.solve(QBB, -t)
        except np.linalg.LinAlgError:
            continue
        delta = np.zeros(p)
        delta[B] = dB
        # sign feasibility of the assumed-active block
        ok = all(dB[len(J) + i] * s >= -1e-12
                 for i, s in enumerate(s for s in sigma if s != 0))
        if not ok:
            continue
        grad = Q @ delta
        # stationarity on J is exact by construction; check J^c
        if any(abs(grad[j]) > 1.0 + 1e-10 for j in Jc):
            continue
        viol = False
        for j, s in zip(Jc, sigma):
            if s != 0 and abs(grad[j] + s) > 1e-9:
                viol = True
                break
        if viol:
            continue
        if found is not None and np.abs(found - delta).max() > 1e-8:
            raise RuntimeError("local problem has non-unique minimizers")
        if found is None:
            found = delta
    if found is None:
        raise RuntimeError("no sign pattern certified optimal")
    grad = Q @ found
    tight = frozenset(j for j in Jc
                      if abs(found[j]) > 0 or abs(abs(grad[j]) - 1.0) <= 1e-9)
    return found, tight


def stability_margin_reference(Q, relevant, sign_rel):
    """Stability margin computed straight from the enumeration oracle.

    Mirrors the printed definition: with L = J u K and t the sign vector
    carried by the minimizer,
      theta = min( 1 - ||Q_{L^c,L} Q_LL^{-1} t_L||_inf ,
                   min_{k in K} |(Q_LL^{-1} t_L)_k| * Q_kk )
    with absent terms dropped.
    """
    Q = np.asarray(Q, dtype=float)
    p = Q.shape[0]
    delta, tight = enumerate_local_problem(Q, relevant, sign_rel)
    J = sorted(relevant)
    K = sorted(tight)
    L = sorted(set(J) | set(K))
    grad = Q @ delta
    t = np.zeros(p)
    t[J] = sign_rel
    for k in K:
        t[k] = np.sign(delta[k]) if delta[k] != 0 else -np.sign(grad[k])
    zL = np.linalg.solve(Q[np.ix_(L, L)], t[L])
    terms = []
    Lc = [j for j in range(p) if j not in set(L)]
    if Lc:
        terms.append(1.0 - float(np.abs(Q[np.ix_(Lc, L)] @ zL).max()))
    if K:
        pos = {j: i for i, j in enumerate(L)}
        terms.append(min(abs(zL[pos[k]]) * Q[k, k] for k in K))
    if not terms:
        raise RuntimeError("margin undefined: no off-support and no tight set")
    return min(terms)
