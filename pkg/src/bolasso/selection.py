"""Support intersection across replicated l1 fits.

The estimator: run the Lasso at a fixed penalty on m replicated datasets,
keep the variables selected every single time, then refit those by least
squares. Replications come from a ReplicationScheme (pairs bootstrap,
residual bootstrap, disjoint splits, or fresh oracle noise).

Replicate solutions are read off one regularization path per replication,
so evaluating a whole penalty grid costs no more than a single penalty.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .lasso import ResidualPathFactory, lasso_path, refit_ols
from .resampling import (
    ReplicationScheme,
    bootstrap_pairs,
    oracle_noise_replicate,
    split_pieces,
    substream,
)
from .types import Dataset, InputError

#: substream index reserved for the split scheme's row shuffle
_SPLIT_STREAM = 1 << 32


def intersect_supports(supports) -> frozenset[int]:
    """Variables present in every one of the given supports."""
    supports = list(supports)
    if not supports:
        raise InputError("cannot intersect an empty collection of supports")
    out = frozenset(supports[0])
    for s in supports[1:]:
        out &= frozenset(s)
    return out


def _supports_from_paths(paths, mu_values):
    """Occupancy tensor (m, G, p) plus the count of clamped replications."""
    m = len(paths)
    G = len(mu_values)
    p = paths[0].p
    occ = np.zeros((m, G, p), dtype=bool)
    clamped = 0
    for k, path in enumerate(paths):
        floor = path.coverage_floor
        hit = False
        for g, mu in enumerate(mu_values):
            if mu < floor - 1e-12 * max(1.0, floor):
                hit = True
            sup = path.support_at(mu, clamp_to_floor=True)
            if sup:
                occ[k, g, list(sup)] = True
        clamped += int(hit)
    return occ, clamped


def replication_support_grid(data: Dataset, scheme: ReplicationScheme, mu_values,
                             *, truth_weights=None, noise_sampler=None,
                             max_active: int | None = None):
    """Supports of every replication at every penalty in ``mu_values``.

    Returns (occupancy, clamped) where occupancy[k, g, j] says replication k
    selected variable j at mu_values[g], and ``clamped`` counts replications
    whose path did not cover some requested penalty (those contribute their
    last uniquely determined support there).
    """
    mu_values = [float(v) for v in np.atleast_1d(mu_values)]
    if any(v <= 0 for v in mu_values):
        raise InputError("all penalties must be positive")
    if scheme.kind == "pairs":
        paths = [lasso_path(bootstrap_pairs(data, substream(scheme.seed, k)),
                            max_active)
                 for k in range(scheme.m)]
    elif scheme.kind == "residuals":
        factory = ResidualPathFactory(data, max_active=max_active)
        idx = np.stack([substream(scheme.seed, k).integers(0, data.n, size=data.n)
                        for k in range(scheme.m)])
        paths = factory.paths(idx)
    elif scheme.kind == "split":
        pieces = split_pieces(data, scheme.m, substream(scheme.seed, _SPLIT_STREAM))
        paths = [lasso_path(piece, max_active) for piece in pieces]
    elif scheme.kind == "oracle_noise":
        if truth_weights is None or noise_sampler is None:
            raise InputError("oracle_noise replication needs truth_weights "
                             "and noise_sampler")
        paths = [lasso_path(oracle_noise_replicate(data.X, truth_weights,
                                                   noise_sampler,
                                                   substream(scheme.seed, k)),
                            max_active)
                 for k in range(scheme.m)]
    else:  # unreachable: ReplicationScheme validates kind
        raise InputError(f"unknown scheme kind {scheme.kind!r}")
    return _supports_from_paths(paths, mu_values)


def lasso_support_grid(data: Dataset, mu_values, max_active: int | None = None):
    """Support of the plain (unreplicated) Lasso at each penalty."""
    occ, clamped = _supports_from_paths([lasso_path(data, max_active)],
                                        [float(v) for v in np.atleast_1d(mu_values)])
    return occ[0], clamped


@dataclass(frozen=True)
class SelectionRun:
    """Everything one intersection run produced, manifest-ready."""

    mu: float
    scheme: ReplicationScheme
    per_replication_supports: tuple[frozenset[int], ...]
    frequencies: np.ndarray
    intersected: frozenset[int]
    refit_weights: np.ndarray
    degenerate_replications: int = 0
    step_one_support: frozenset[int] | None = None

    def manifest(self) -> dict:
        """Structured record of the run (variables reported 1-based)."""
        return {
            "mu": self.mu,
            "scheme": {"kind": self.scheme.kind, "m": self.scheme.m,
                       "seed": self.scheme.seed},
            "selection_frequencies": [float(f) for f in self.frequencies],
            "intersected_support": [j + 1 for j in sorted(self.intersected)],
            "refit_weights": [float(w) for w in self.refit_weights],
            "degenerate_replications": self.degenerate_replications,
            "step_one_support": (None if self.step_one_support is None
                                 else [j + 1 for j in sorted(self.step_one_support)]),
        }


def _assemble_run(data, mu, scheme, occ, clamped, step_one=None) -> SelectionRun:
    supports = tuple(frozenset(int(j) for j in np.flatnonzero(occ[k, 0]))
                     for k in range(occ.shape[0]))
    frequencies = occ[:, 0, :].mean(axis=0)
    intersected = intersect_supports(supports)
    return SelectionRun(mu=float(mu), scheme=scheme,
                        per_replication_supports=supports,
                        frequencies=frequencies, intersected=intersected,
                        refit_weights=refit_ols(data, intersected),
                        degenerate_replications=clamped,
                        step_one_support=step_one)


def run_bolasso(data: Dataset, mu: float, scheme: ReplicationScheme,
                *, truth_weights=None, noise_sampler=None,
                max_active: int | None = None) -> SelectionRun:
    """Intersection of the supports of m replicated fits at penalty ``mu``."""
    if mu <= 0:
        raise InputError(f"mu must be positive, got {mu}")
    occ, clamped = replication_support_grid(
        data, scheme, [mu], truth_weights=truth_weights,
        noise_sampler=noise_sampler, max_active=max_active)
    return _assemble_run(data, mu, scheme, occ, clamped)


def step_one_support(data: Dataset, mu: float,
                     base_path=None, max_active: int | None = None) -> frozenset[int]:
    """Screening support: plain Lasso at the inflated penalty mu*ln(p)."""
    if data.p < 2:
        raise InputError("the two-step procedure needs p >= 2")
    path = base_path if base_path is not None else lasso_path(data, max_active)
    return path.support_at(mu * math.log(data.p), clamp_to_floor=True)


def run_two_step(data: Dataset, mu: float, scheme: ReplicationScheme,
                 *, max_active: int | None = None) -> SelectionRun:
    """Screen at mu*ln(p), then intersect replicated fits on the survivors.

    The first step runs one Lasso on the full data at the inflated penalty;
    the second runs the intersection procedure at ``mu`` on the dataset
    restricted to the screened columns (replication residuals, when used,
    are recomputed inside the restricted problem). Results are re-indexed
    into the original 0..p-1 variables.
    """
    if mu <= 0:
        raise InputError(f"mu must be positive, got {mu}")
    screened = step_one_support(data, mu, max_active=max_active)
    cols = sorted(screened)
    p = data.p
    if not cols:
        empty = frozenset()
        return SelectionRun(mu=float(mu), scheme=scheme,
                            per_replication_supports=(empty,) * scheme.m,
                            frequencies=np.zeros(p),
                            intersected=empty, refit_weights=np.zeros(p),
                            degenerate_replications=0, step_one_support=empty)
    sub = run_bolasso(Dataset(data.X[:, cols], data.y), mu, scheme,
                      max_active=max_active)
    back = np.asarray(cols)
    supports = tuple(frozenset(int(back[j]) for j in s)
                     for s in sub.per_replication_supports)
    frequencies = np.zeros(p)
    frequencies[back] = sub.frequencies
    intersected = frozenset(int(back[j]) for j in sub.intersected)
    return SelectionRun(mu=float(mu), scheme=scheme,
                        per_replication_supports=supports,
                        frequencies=frequencies, intersected=intersected,
                        refit_weights=refit_ols(data, intersected),
                        degenerate_replications=sub.degenerate_replications,
                        step_one_support=screened)


def two_step_plain_grid(data: Dataset, mu_values, max_active: int | None = None):
    """Support of the unreplicated two-step fit over a penalty grid.

    Screens at mu*ln(p) off one full-data path, then reads the support of
    a single restricted Lasso at mu. Returns ((G, p) occupancy, clamped).
    """
    mu_values = [float(v) for v in np.atleast_1d(mu_values)]
    base = lasso_path(data, max_active)
    groups: dict[frozenset[int], list[int]] = {}
    for g, mu in enumerate(mu_values):
        s = step_one_support(data, mu, base_path=base)
        groups.setdefault(s, []).append(g)
    occ = np.zeros((len(mu_values), data.p), dtype=bool)
    clamped = 0
    for screened, positions in groups.items():
        cols = sorted(screened)
        if not cols:
            continue
        sub_occ, sub_clamped = lasso_support_grid(
            Dataset(data.X[:, cols], data.y),
            [mu_values[g] for g in positions], max_active)
        clamped += sub_clamped
        back = np.asarray(cols)
        for i, g in enumerate(positions):
            occ[g, back] = sub_occ[i]
    return occ, clamped


def two_step_support_grid(data: Dataset, scheme: ReplicationScheme, mu_values,
                          *, max_active: int | None = None):
    """Occupancy of the two-step procedure over a penalty grid.

    The screening support only changes at breakpoints of the full-data
    path, so grid penalties are grouped by screened column set and each
    group reuses one batch of replicate paths on its restricted data.
    Returns (occupancy (m, G, p), clamped_events).
    """
    mu_values = [float(v) for v in np.atleast_1d(mu_values)]
    base = lasso_path(data, max_active)
    groups: dict[frozenset[int], list[int]] = {}
    for g, mu in enumerate(mu_values):
        s = step_one_support(data, mu, base_path=base)
        groups.setdefault(s, []).append(g)
    occ = np.zeros((scheme.m, len(mu_values), data.p), dtype=bool)
    clamped = 0
    for screened, positions in groups.items():
        cols = sorted(screened)
        if not cols:
            continue
        sub_data = Dataset(data.X[:, cols], data.y)
        sub_occ, sub_clamped = replication_support_grid(
            sub_data, scheme, [mu_values[g] for g in positions],
            max_active=max_active)
        clamped += sub_clamped
        back = np.asarray(cols)
        for i, g in enumerate(positions):
            occ[:, g, back] = sub_occ[:, i, :]
    return occ, clamped
