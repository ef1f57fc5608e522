"""Replication schemes: pairs/residual bootstrap, splits, oracle noise.

Randomness is counter-based: every replication draws from its own Philox
substream keyed by (seed, index...), so results do not depend on the order
replications are evaluated in or on how work is sharded across processes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import Dataset, InputError

VALID_KINDS = ("pairs", "residuals", "split", "oracle_noise")


def substream(seed: int, *indices: int) -> np.random.Generator:
    """Independent generator for one replication of a seeded run.

    Streams for distinct index tuples are statistically independent and
    stable across platforms and process boundaries.
    """
    ss = np.random.SeedSequence(entropy=int(seed),
                                spawn_key=tuple(int(i) for i in indices))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *indices: int) -> int:
    """A fresh 63-bit seed deterministically derived from (seed, indices)."""
    ss = np.random.SeedSequence(entropy=int(seed),
                                spawn_key=tuple(int(i) for i in indices))
    return int(ss.generate_state(1, np.uint64)[0] >> 1)


@dataclass(frozen=True)
class ReplicationScheme:
    """How replicated datasets are produced: kind, count and seed."""

    kind: str
    m: int
    seed: int

    def __post_init__(self):
        if self.kind not in VALID_KINDS:
            raise InputError(f"unknown scheme kind {self.kind!r}; "
                             f"expected one of {VALID_KINDS}")
        if self.m < 1:
            raise InputError(f"m must be at least 1, got {self.m}")


@dataclass(frozen=True)
class ResidualSet:
    """Raw and recentred residuals of a fit, with the subtracted mean."""

    raw: np.ndarray
    centered: np.ndarray
    mean: float


def bootstrap_pairs(data: Dataset, rng: np.random.Generator) -> Dataset:
    """Resample rows (x_i, y_i) jointly with replacement, same n."""
    idx = rng.integers(0, data.n, size=data.n)
    return Dataset(data.X[idx], data.y[idx])


def compute_residuals(data: Dataset, w_hat) -> ResidualSet:
    """Residuals y - Xw_hat and their recentred version (mean removed)."""
    w_hat = np.asarray(w_hat, dtype=float)
    if w_hat.shape != (data.p,):
        raise InputError(f"w_hat has shape {w_hat.shape}, expected ({data.p},)")
    raw = data.y - data.X @ w_hat
    mean = float(raw.mean())
    return ResidualSet(raw=raw, centered=raw - mean, mean=mean)


def bootstrap_residuals(data: Dataset, w_hat, rng: np.random.Generator) -> Dataset:
    """Fix the design, resample recentred residuals onto fitted values.

    y*_i = x_i'w_hat + eps_hat_{i*} with i* drawn iid uniform; X is reused
    unchanged.
    """
    res = compute_residuals(data, w_hat)
    idx = rng.integers(0, data.n, size=data.n)
    y_star = data.X @ np.asarray(w_hat, dtype=float) + res.centered[idx]
    return Dataset(data.X, y_star)


def split_pieces(data: Dataset, m: int, rng: np.random.Generator | None = None) -> list[Dataset]:
    """Partition the rows into m disjoint pieces of size floor(n/m).

    Rows are shuffled first when ``rng`` is given; leftover rows (n mod m)
    are dropped. With m = 1 the single piece is a permutation of the data.
    """
    if m < 1:
        raise InputError(f"m must be at least 1, got {m}")
    size = data.n // m
    if size < 1:
        raise InputError(f"cannot split {data.n} rows into {m} nonempty pieces")
    order = np.arange(data.n) if rng is None else rng.permutation(data.n)
    return [Dataset(data.X[order[i * size:(i + 1) * size]],
                    data.y[order[i * size:(i + 1) * size]])
            for i in range(m)]


def split_dropped_rows(n: int, m: int) -> int:
    """How many rows a split into m pieces discards."""
    return n - m * (n // m)


def oracle_noise_replicate(design, w_true, noise_sampler, rng: np.random.Generator) -> Dataset:
    """Fresh response from the known truth: y = X w_true + new noise.

    ``noise_sampler(size, rng)`` draws the noise vector; the design is kept.
    """
    X = np.asarray(design, dtype=float)
    w_true = np.asarray(w_true, dtype=float)
    if X.ndim != 2 or w_true.shape != (X.shape[1],):
        raise InputError("design and w_true have incompatible shapes")
    y = X @ w_true + noise_sampler(X.shape[0], rng)
    return Dataset(X, y)


def gaussian_noise(sigma: float):
    """Noise sampler for iid N(0, sigma^2) draws."""
    if sigma < 0:
        raise InputError(f"sigma must be nonnegative, got {sigma}")

    def sample(size: int, rng: np.random.Generator) -> np.ndarray:
        return sigma * rng.standard_normal(size)

    return sample
