"""Synthetic problem generator with controllable consistency status.

Designs are iid Gaussian rows under a chosen population covariance; the
relevant variables occupy the leading indices, with uniform magnitudes and
random signs. When asked for a covariance that satisfies or violates the
consistency condition, the sampler rejects until the classification (done
on the population covariance, after unit-diagonal normalization) matches.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .diagnostics import consistency_condition
from .resampling import substream
from .types import Dataset, GroundTruth, InputError, MomentForm, compute_moments

#: rejection-sampling budget for want_condition
MAX_RETRIES = 10_000

_WANTS = ("any", "satisfied", "violated")


@dataclass(frozen=True)
class GeneratorSpec:
    """Recipe for one synthetic problem family."""

    n: int
    p: int
    j_count: int
    noise_sigma: float
    seed: int
    covariance: object = "identity"  # "identity" | "random_spd" | matrix
    w_magnitude_range: tuple[float, float] = (0.5, 1.5)
    want_condition: str = "any"
    spectrum_range: tuple[float, float] = (1.0 / 3.0, 3.0)

    def __post_init__(self):
        if self.n < 1 or self.p < 1:
            raise InputError(f"need n >= 1 and p >= 1, got n={self.n}, p={self.p}")
        if not 0 <= self.j_count <= self.p:
            raise InputError(f"j_count must lie in [0, {self.p}], got {self.j_count}")
        if self.noise_sigma < 0:
            raise InputError(f"noise_sigma must be nonnegative, got {self.noise_sigma}")
        lo, hi = self.w_magnitude_range
        if not 0 < lo <= hi:
            raise InputError(f"bad magnitude range ({lo}, {hi})")
        if self.want_condition not in _WANTS:
            raise InputError(f"want_condition must be one of {_WANTS}")
        slo, shi = self.spectrum_range
        if not 0 < slo <= shi:
            raise InputError(f"bad spectrum range ({slo}, {shi})")
        if isinstance(self.covariance, str):
            if self.covariance not in ("identity", "random_spd"):
                raise InputError(f"unknown covariance kind {self.covariance!r}")
        else:
            object.__setattr__(self, "covariance",
                               np.asarray(self.covariance, dtype=float))

    def to_dict(self) -> dict:
        """JSON-ready form; inverse of from_dict."""
        cov = self.covariance
        if not isinstance(cov, str):
            cov = np.asarray(cov).tolist()
        return {"n": self.n, "p": self.p, "j_count": self.j_count,
                "noise_sigma": self.noise_sigma, "seed": self.seed,
                "covariance": cov,
                "w_magnitude_range": list(self.w_magnitude_range),
                "want_condition": self.want_condition,
                "spectrum_range": list(self.spectrum_range)}

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorSpec":
        d = dict(d)
        for key in ("w_magnitude_range", "spectrum_range"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


@dataclass(frozen=True)
class SyntheticInstance:
    """One generated problem: data, truth, empirical moments, provenance."""

    dataset: Dataset
    truth: GroundTruth
    moments: MomentForm
    population_covariance: np.ndarray
    retries: int


def random_unit_covariance(p: int, rng: np.random.Generator,
                           spectrum_range=(1.0 / 3.0, 3.0)) -> np.ndarray:
    """Random SPD matrix: Haar-conjugated log-uniform spectrum, unit diagonal."""
    lo, hi = spectrum_range
    lam = np.exp(rng.uniform(np.log(lo), np.log(hi), size=p))
    A = rng.standard_normal((p, p))
    basis, r = np.linalg.qr(A)
    basis = basis * np.sign(np.diag(r))
    S = (basis * lam) @ basis.T
    d = np.sqrt(np.diag(S))
    S = S / np.outer(d, d)
    return 0.5 * (S + S.T)


def _draw_truth(spec: GeneratorSpec, rng: np.random.Generator) -> GroundTruth:
    w = np.zeros(spec.p)
    if spec.j_count:
        lo, hi = spec.w_magnitude_range
        mags = rng.uniform(lo, hi, size=spec.j_count)
        signs = rng.choice([-1.0, 1.0], size=spec.j_count)
        w[: spec.j_count] = mags * signs
    return GroundTruth(w)


def _condition_matches(cov, truth, want) -> bool:
    if want == "any":
        return True
    value = consistency_condition(MomentForm(cov, np.zeros(cov.shape[0])), truth)
    return value < 1.0 if want == "satisfied" else value > 1.0


def generate(spec: GeneratorSpec) -> SyntheticInstance:
    """Draw one dataset/truth pair as described by ``spec``.

    The weight vector is drawn once; the covariance is then rejection-
    sampled (when random) until the population consistency condition has
    the requested status, up to MAX_RETRIES draws. The retry count is part
    of the returned record.
    """
    truth = _draw_truth(spec, substream(spec.seed, 0))
    retries = 0
    if isinstance(spec.covariance, np.ndarray):
        cov = np.asarray(spec.covariance, dtype=float)
        if cov.shape != (spec.p, spec.p):
            raise InputError(f"covariance has shape {cov.shape}, "
                             f"expected ({spec.p}, {spec.p})")
        MomentForm(cov, np.zeros(spec.p))  # validates symmetry and PSD
        if not _condition_matches(cov, truth, spec.want_condition):
            raise InputError("supplied covariance does not have the requested "
                             "consistency status")
    elif spec.covariance == "identity":
        cov = np.eye(spec.p)
        if not _condition_matches(cov, truth, spec.want_condition):
            raise InputError("identity covariance cannot satisfy "
                             f"want_condition={spec.want_condition!r} here")
    else:
        cov = None
        for attempt in range(MAX_RETRIES):
            cand = random_unit_covariance(spec.p, substream(spec.seed, 1, attempt),
                                          spec.spectrum_range)
            if _condition_matches(cand, truth, spec.want_condition):
                cov = cand
                retries = attempt
                break
        if cov is None:
            raise RuntimeError(f"no covariance with want_condition="
                               f"{spec.want_condition!r} in {MAX_RETRIES} draws")
    rng = substream(spec.seed, 2)
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        chol = np.linalg.cholesky(cov + 1e-12 * np.eye(spec.p))
    X = rng.standard_normal((spec.n, spec.p)) @ chol.T
    y = X @ truth.weights + spec.noise_sigma * rng.standard_normal(spec.n)
    data = Dataset(X, y)
    cov_locked = cov.copy()
    cov_locked.flags.writeable = False
    return SyntheticInstance(dataset=data, truth=truth,
                             moments=compute_moments(data),
                             population_covariance=cov_locked, retries=retries)
