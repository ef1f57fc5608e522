"""Path solver versus an independent certified oracle, plus API contracts."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bolasso import (
    CoverageError,
    Dataset,
    InputError,
    MomentForm,
    RankDeficiencyError,
    ResidualPathFactory,
    compute_moments,
    error_bound,
    kkt_check,
    lasso_path,
    lasso_path_from_moments,
    refit_ols,
    solve_at,
)
from bolasso.resampling import compute_residuals
from helpers import random_dataset
from oracles import certified_lasso_oracle, soft_threshold


def _query_grid(path, count=6, rng=None):
    """Penalties safely inside the covered range, log-spaced."""
    hi = max(1.1 * path.mu_max, 1e-3)
    lo = max(path.coverage_floor * 1.02, 1e-4 * hi)
    return np.geomspace(max(lo, 1e-12), hi, count)


def test_path_matches_certified_oracle():
    rng = np.random.default_rng(7)
    checked = 0
    for trial in range(25):
        n = int(rng.integers(10, 41))
        p = int(rng.integers(2, 9))
        if trial % 5 == 4:
            n, p = int(rng.integers(4, 8)), 10  # underdetermined
        data, _ = random_dataset(rng, n, p,
                                 duplicate_col=(trial % 7 == 3), sigma=0.3)
        path = lasso_path(data)
        for mu in _query_grid(path):
            w = path.weights_at(float(mu))
            ref = certified_lasso_oracle(data.X, data.y, float(mu))
            assert np.abs(w - ref).max() <= 1e-6
            assert kkt_check(data, float(mu), w) <= 1e-8
            checked += 1
    assert checked >= 150


def test_orthonormal_design_soft_threshold():
    rng = np.random.default_rng(8)
    n, p = 64, 8
    basis, _ = np.linalg.qr(rng.standard_normal((n, p)))
    X = np.sqrt(n) * basis  # X'X/n is exactly the identity
    y = rng.standard_normal(n)
    data = Dataset(X, y)
    c = X.T @ y / n
    path = lasso_path(data)
    for mu in np.linspace(0.0, 1.2 * np.abs(c).max(), 12):
        np.testing.assert_allclose(path.weights_at(float(mu)),
                                   soft_threshold(c, mu), atol=1e-10)


def test_zero_above_mu_max():
    rng = np.random.default_rng(9)
    data, _ = random_dataset(rng, 30, 5)
    path = lasso_path(data)
    assert path.mu_max == pytest.approx(np.abs(compute_moments(data).c).max())
    for mu in (path.mu_max, 1.5 * path.mu_max, 10.0 * path.mu_max):
        assert not path.weights_at(mu).any()
        assert path.support_at(mu) == frozenset()


def test_piecewise_affine_and_continuous():
    rng = np.random.default_rng(10)
    data, _ = random_dataset(rng, 40, 6)
    path = lasso_path(data)
    bp = path.breakpoints
    assert np.all(np.diff(bp) < 0)  # strictly decreasing
    assert bp[0] == pytest.approx(path.mu_max)
    for seg in path.segments:
        lo, hi = seg.mu_low, seg.mu_high
        if not np.isfinite(hi):
            continue
        w_lo, w_hi = seg.weights(lo, path.p), seg.weights(hi, path.p)
        mid = 0.5 * (lo + hi)
        np.testing.assert_allclose(seg.weights(mid, path.p),
                                   0.5 * (w_lo + w_hi), atol=1e-12)
    # continuity across breakpoints: adjacent segments agree at the joint
    for left, right in zip(path.segments, path.segments[1:]):
        mu = left.mu_low
        assert mu == pytest.approx(right.mu_high)
        np.testing.assert_allclose(left.weights(mu, path.p),
                                   right.weights(mu, path.p), atol=1e-9)


def test_mu_zero_equals_least_squares():
    rng = np.random.default_rng(11)
    data, _ = random_dataset(rng, 50, 6)
    path = lasso_path(data)
    ols, *_ = np.linalg.lstsq(data.X, data.y, rcond=None)
    np.testing.assert_allclose(path.weights_at(0.0), ols, atol=1e-8)


def test_trivial_zero_linear_term():
    X = np.eye(4)
    path = lasso_path(Dataset(X, np.zeros(4)))
    assert path.mu_max == 0.0
    assert path.termination == "complete"
    assert not path.weights_at(0.0).any()
    assert not path.weights_at(3.0).any()


def test_degenerate_twin_columns():
    # identical columns tie at entry; the pivot fails and the path stops
    rng = np.random.default_rng(12)
    X = rng.standard_normal((20, 3))
    X[:, 2] = X[:, 1]
    y = X[:, 1] + 0.01 * rng.standard_normal(20)
    path = lasso_path(Dataset(X, y))
    assert path.terminated_degenerate
    floor = path.coverage_floor
    assert floor > 0.0
    with pytest.raises(CoverageError):
        path.weights_at(0.5 * floor)
    # clamped queries return the last uniquely determined support
    assert path.support_at(0.5 * floor, clamp_to_floor=True) == \
        path.support_at(floor)


def test_removal_events_complete_cleanly():
    # correlated designs put coefficient zero-crossings inside segments;
    # the path must process those removals and still reach mu = 0
    rng = np.random.default_rng(21)
    with_removal = 0
    for _ in range(300):
        mix = np.eye(4) + 0.7 * rng.standard_normal((4, 4)) / 2.0
        X = rng.standard_normal((20, 4)) @ mix
        w = np.zeros(4)
        w[:2] = rng.choice([-1, 1], 2) * rng.uniform(0.5, 1.5, 2)
        y = X @ w + 0.4 * rng.standard_normal(20)
        data = Dataset(X, y)
        path = lasso_path(data)
        assert path.termination == "complete"
        assert path.coverage_floor == 0.0
        prev = None
        removed = False
        for seg in path.segments:
            cur = set(seg.active)
            if prev is not None and prev - cur:
                removed = True
            prev = cur
        if removed:
            with_removal += 1
            for mu in np.geomspace(1e-3 * path.mu_max, path.mu_max, 5):
                assert kkt_check(data, float(mu),
                                 path.weights_at(float(mu))) <= 1e-8
    assert with_removal >= 30


def test_max_active_termination():
    rng = np.random.default_rng(13)
    data, _ = random_dataset(rng, 60, 6, k=4, sigma=0.05)
    path = lasso_path(data, max_active=2)
    assert path.termination == "max_active"
    assert path.coverage_floor > 0.0
    mu = path.coverage_floor * 1.01
    assert len(path.support_at(mu)) <= 2
    assert kkt_check(data, mu, path.weights_at(mu)) <= 1e-8
    with pytest.raises(InputError):
        lasso_path(data, max_active=0)


def test_weights_at_input_validation():
    rng = np.random.default_rng(14)
    data, _ = random_dataset(rng, 20, 4)
    path = lasso_path(data)
    with pytest.raises(InputError):
        path.weights_at(-0.1)
    with pytest.raises(InputError):
        path.weights_at(float("nan"))


def test_solve_at_subgradient():
    rng = np.random.default_rng(15)
    data, _ = random_dataset(rng, 40, 5)
    path = lasso_path(data)
    for mu in _query_grid(path, count=5):
        sol = solve_at(path, float(mu))
        assert np.abs(sol.subgradient).max() <= 1.0 + 1e-9
        for j in sol.support:
            assert sol.subgradient[j] == pytest.approx(sol.signs[j], abs=1e-9)
    top = solve_at(path, 2.0 * path.mu_max)
    assert top.support == frozenset()
    moments_only = lasso_path_from_moments(compute_moments(data))
    bare = lasso_path_from_moments(
        MomentForm(np.eye(2), np.array([1.0, -0.5])))
    assert solve_at(moments_only, 0.1).mu == 0.1
    assert solve_at(bare, 0.6).support == frozenset({0})


def test_kkt_check_api():
    rng = np.random.default_rng(16)
    data, _ = random_dataset(rng, 30, 4)
    path = lasso_path(data)
    mu = 0.3 * path.mu_max
    w = path.weights_at(mu)
    assert kkt_check(data, mu, w) <= 1e-10
    assert kkt_check(compute_moments(data), mu, w) <= 1e-10
    bad = w.copy()
    bad[0] += 0.5
    assert kkt_check(data, mu, bad) > 1e-3
    with pytest.raises(InputError):
        kkt_check(data, -1.0, w)
    with pytest.raises(InputError):
        kkt_check(data, mu, np.zeros(3))


def test_refit_ols():
    rng = np.random.default_rng(17)
    data, _ = random_dataset(rng, 40, 6)
    w = refit_ols(data, {1, 3})
    ref, *_ = np.linalg.lstsq(data.X[:, [1, 3]], data.y, rcond=None)
    np.testing.assert_allclose(w[[1, 3]], ref, atol=1e-12)
    assert not w[[0, 2, 4, 5]].any()
    assert not refit_ols(data, set()).any()
    with pytest.raises(InputError):
        refit_ols(data, {7})
    X = np.ones((10, 2))
    dup = Dataset(X, np.ones(10))
    with pytest.raises(RankDeficiencyError, match=r"\[0, 1\]"):
        refit_ols(dup, {0, 1})


def test_error_bound_deterministic_inequality():
    rng = np.random.default_rng(18)
    for _ in range(10):
        n, p = 80, 5
        X = rng.standard_normal((n, p))
        w_bar = rng.uniform(-2, 2, p)
        eps = 0.4 * rng.standard_normal(n)
        data = Dataset(X, X @ w_bar + eps)
        moments = compute_moments(data)
        q = X.T @ eps / n
        path = lasso_path(data)
        for mu in (0.01, 0.1, 0.5):
            w_hat = path.weights_at(mu)
            bound = error_bound(moments, mu, float(np.linalg.norm(q)))
            assert np.linalg.norm(w_hat - w_bar) <= bound + 1e-12


def test_error_bound_validation():
    m = MomentForm(np.eye(2), np.zeros(2))
    with pytest.raises(InputError):
        error_bound(m, -0.1, 1.0)
    rank_def = compute_moments(Dataset(np.ones((5, 2)), np.ones(5)))
    with pytest.raises(RankDeficiencyError):
        error_bound(rank_def, 0.1, 1.0)


def test_residual_factory_matches_oracle():
    rng = np.random.default_rng(19)
    data, _ = random_dataset(rng, 40, 6, sigma=0.4)
    base = lasso_path(data)
    factory = ResidualPathFactory(data, base_path=base)
    idx = rng.integers(0, data.n, size=(3, data.n))
    paths = factory.paths(idx)
    for k, rep in enumerate(paths):
        for mu in _query_grid(rep, count=5):
            mu = float(mu)
            # the replicate's response depends on mu through the base fit
            res = compute_residuals(data, base.weights_at(mu))
            y_star = data.X @ base.weights_at(mu) + res.centered[idx[k]]
            ref = certified_lasso_oracle(data.X, y_star, mu)
            assert np.abs(rep.weights_at(mu) - ref).max() <= 1e-6


def test_residual_factory_single_row():
    rng = np.random.default_rng(20)
    data, _ = random_dataset(rng, 25, 4)
    factory = ResidualPathFactory(data)
    one = factory.paths(rng.integers(0, data.n, size=data.n))
    assert len(one) == 1


def test_path_from_moments_mu_floor():
    rng = np.random.default_rng(21)
    data, _ = random_dataset(rng, 30, 5)
    moments = compute_moments(data)
    floored = lasso_path_from_moments(moments, mu_floor=0.05)
    assert floored.coverage_floor >= 0.05 - 1e-15
    full = lasso_path_from_moments(moments)
    mu = max(0.05, 0.2 * full.mu_max)
    np.testing.assert_allclose(floored.weights_at(mu), full.weights_at(mu),
                               atol=1e-10)
    with pytest.raises(InputError):
        lasso_path_from_moments(moments, mu_floor=-1.0)


@given(st.integers(0, 10_000), st.floats(0.02, 0.98))
@settings(max_examples=25, deadline=None)
def test_kkt_holds_along_random_paths(seed, frac):
    rng = np.random.default_rng(seed)
    data, _ = random_dataset(rng, 24, 6)
    path = lasso_path(data)
    mu = max(path.coverage_floor, frac * path.mu_max)
    assert kkt_check(data, mu, path.weights_at(mu)) <= 1e-8
