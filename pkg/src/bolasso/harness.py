"""Monte Carlo experiment harness.

Three seeded sweeps over synthetic problem families: per-variable
selection probability across a penalty grid, correct-pattern probability
across replication counts, and diagnostic phase maps over a (sample
count, support size) grid. Work parallelizes across processes, but
every reduction runs in a fixed order, so a given config and seed
produce byte-identical output files at any worker count.
"""

from __future__ import annotations

import math
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataio import config_hash, fmt, write_json
from .diagnostics import assumption_check
from .lasso import lasso_path
from .resampling import (
    VALID_KINDS,
    ReplicationScheme,
    derive_seed,
    gaussian_noise,
    substream,
)
from .selection import (
    replication_support_grid,
    two_step_plain_grid,
    two_step_support_grid,
)
from .synthetic import GeneratorSpec, SyntheticInstance, generate
from .types import (
    Dataset,
    GroundTruth,
    InputError,
    MomentForm,
    RankDeficiencyError,
    sign_pattern,
)

_LABEL_RE = re.compile(r"^[A-Za-z0-9_.-]+$")

#: draws per phase-map task; tasks stay small so workers load-balance
_PHASE_BLOCK = 125


@dataclass(frozen=True)
class MuGrid:
    """Log-spaced penalty grid, ascending."""

    lo: float
    hi: float
    count: int

    def __post_init__(self):
        if not 0.0 < self.lo < self.hi:
            raise InputError(f"need 0 < lo < hi, got ({self.lo}, {self.hi})")
        if self.count < 2:
            raise InputError(f"penalty grid needs >= 2 points, got {self.count}")

    def values(self) -> np.ndarray:
        return np.geomspace(self.lo, self.hi, self.count)

    def to_dict(self) -> dict:
        return {"min": self.lo, "max": self.hi, "count": self.count}

    @classmethod
    def from_dict(cls, d: dict) -> "MuGrid":
        return cls(float(d["min"]), float(d["max"]), int(d["count"]))


@dataclass(frozen=True)
class ProcedureSpec:
    """One selection procedure to run per trial.

    ``kind`` and ``m`` describe the replication scheme (per-trial seeds
    are derived by the harness); ``two_step`` replicates inside the
    screened problem instead of the full one. ``label`` names output
    files and defaults to the kind, suffixed when two-step.
    """

    kind: str
    m: int
    two_step: bool = False
    label: str | None = None

    def __post_init__(self):
        if self.kind not in VALID_KINDS:
            raise InputError(f"kind must be one of {VALID_KINDS}, got {self.kind!r}")
        if self.m < 1:
            raise InputError(f"m must be >= 1, got {self.m}")
        if self.two_step and self.kind == "oracle_noise":
            raise InputError("two_step replicates the observed data and cannot "
                             "use the oracle_noise scheme")
        if self.label is None:
            suffix = "_two_step" if self.two_step else ""
            object.__setattr__(self, "label", self.kind + suffix)
        if not _LABEL_RE.match(self.label):
            raise InputError(f"label {self.label!r} is not filesystem-safe")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "m": self.m, "two_step": self.two_step,
                "label": self.label}

    @classmethod
    def from_dict(cls, d: dict) -> "ProcedureSpec":
        return cls(kind=d["kind"], m=int(d["m"]),
                   two_step=bool(d.get("two_step", False)),
                   label=d.get("label"))


@dataclass(frozen=True)
class ExperimentConfig:
    """A full sweep: one problem family, a penalty grid, procedures.

    The generator fixes the design and ground truth; each outer trial
    redraws the observation noise. ``m_values`` lists the replication
    counts reported by the pattern sweep (m = 1 means the plain,
    unreplicated fit). ``output_dir`` is a runtime destination and is
    excluded from to_dict, so config hashes identify the experiment.
    """

    generator: GeneratorSpec
    mu_grid: MuGrid
    procedures: tuple[ProcedureSpec, ...]
    outer_trials: int
    m_values: tuple[int, ...] = ()
    seed: int = 0
    output_dir: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "procedures", tuple(self.procedures))
        object.__setattr__(self, "m_values",
                           tuple(int(v) for v in self.m_values))
        if self.outer_trials < 1:
            raise InputError(f"outer_trials must be >= 1, got {self.outer_trials}")
        if not self.procedures:
            raise InputError("need at least one procedure")
        labels = [q.label for q in self.procedures]
        if len(set(labels)) != len(labels):
            raise InputError(f"duplicate procedure labels: {labels}")
        if any(m < 1 for m in self.m_values):
            raise InputError(f"m_values must be >= 1, got {self.m_values}")
        if list(self.m_values) != sorted(set(self.m_values)):
            raise InputError("m_values must be strictly increasing")

    def to_dict(self) -> dict:
        return {"generator": self.generator.to_dict(),
                "mu_grid": self.mu_grid.to_dict(),
                "procedures": [q.to_dict() for q in self.procedures],
                "outer_trials": self.outer_trials,
                "m_values": list(self.m_values),
                "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        return cls(generator=GeneratorSpec.from_dict(d["generator"]),
                   mu_grid=MuGrid.from_dict(d["mu_grid"]),
                   procedures=tuple(ProcedureSpec.from_dict(q)
                                    for q in d["procedures"]),
                   outer_trials=int(d["outer_trials"]),
                   m_values=tuple(int(v) for v in d.get("m_values", ())),
                   seed=int(d.get("seed", 0)),
                   output_dir=d.get("output_dir"))


@dataclass(frozen=True)
class ProbabilityMatrix:
    """Labeled matrix of empirical probabilities, one row per variable."""

    row_name: str
    row_labels: tuple[str, ...]
    col_name: str
    col_labels: tuple[str, ...]
    values: np.ndarray
    metadata: dict

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (len(self.row_labels), len(self.col_labels)):
            raise InputError(f"values shape {vals.shape} does not match "
                             f"{len(self.row_labels)} x {len(self.col_labels)} labels")
        if not np.all(np.isfinite(vals)):
            raise InputError("probabilities must be finite")
        if vals.min() < -1e-12 or vals.max() > 1 + 1e-12:
            raise InputError("probabilities must lie in [0, 1]")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "row_labels", tuple(self.row_labels))
        object.__setattr__(self, "col_labels", tuple(self.col_labels))

    def save(self, path) -> None:
        """CSV of the values plus a .meta.json sidecar."""
        path = Path(path)
        _write_labeled_csv(path, self.row_name, self.row_labels,
                           self.col_labels, self.values)
        write_json(path.with_name(path.stem + ".meta.json"), self.metadata)


@dataclass(frozen=True)
class PhaseConfig:
    """Grid over (sample count, relevant count) for the diagnostic maps."""

    p: int
    n_values: tuple[int, ...]
    j_values: tuple[int, ...]
    draws: int
    seed: int = 0
    output_dir: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "n_values",
                           tuple(int(v) for v in self.n_values))
        object.__setattr__(self, "j_values",
                           tuple(int(v) for v in self.j_values))
        if self.p < 1:
            raise InputError(f"p must be >= 1, got {self.p}")
        if self.draws < 1:
            raise InputError(f"draws must be >= 1, got {self.draws}")
        if not self.n_values or any(n < 1 for n in self.n_values):
            raise InputError(f"bad n_values {self.n_values}")
        if not self.j_values or any(not 0 <= j <= self.p for j in self.j_values):
            raise InputError(f"j_values must lie in [0, {self.p}]")
        for vals in (self.n_values, self.j_values):
            if list(vals) != sorted(set(vals)):
                raise InputError("grid values must be strictly increasing")

    def to_dict(self) -> dict:
        return {"p": self.p, "n_values": list(self.n_values),
                "j_values": list(self.j_values), "draws": self.draws,
                "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "PhaseConfig":
        return cls(p=int(d["p"]),
                   n_values=tuple(int(v) for v in d["n_values"]),
                   j_values=tuple(int(v) for v in d["j_values"]),
                   draws=int(d["draws"]), seed=int(d.get("seed", 0)),
                   output_dir=d.get("output_dir"))


@dataclass(frozen=True)
class PhaseResult:
    """Per-cell probabilities and the conditional log stability margin.

    ``log_theta`` averages log(theta) over draws where the local problem
    was unique and stable; ``qualifying`` counts those draws. Cells with
    no qualifying draw (including the trivial relevant-count-zero row)
    hold NaN.
    """

    n_values: tuple[int, ...]
    j_values: tuple[int, ...]
    consistency: np.ndarray
    stability: np.ndarray
    log_theta: np.ndarray
    qualifying: np.ndarray
    metadata: dict

    def save(self, out_dir) -> None:
        out = Path(out_dir)
        rows = tuple(str(n) for n in self.n_values)
        cols = tuple(str(j) for j in self.j_values)
        for name, vals in (("phase_consistency", self.consistency),
                           ("phase_stability", self.stability),
                           ("phase_log_theta", self.log_theta),
                           ("phase_qualifying", self.qualifying)):
            path = out / f"{name}.csv"
            _write_labeled_csv(path, "n", rows, cols, vals)
            write_json(path.with_name(f"{name}.meta.json"),
                       {**self.metadata, "matrix": name})


def _write_labeled_csv(path, row_name, row_labels, col_labels, values) -> None:
    lines = [",".join([row_name, *col_labels])]
    for label, row in zip(row_labels, np.asarray(values)):
        lines.append(",".join([label, *(fmt(v) for v in row)]))
    Path(path).write_text("\n".join(lines) + "\n")


def _resolve_outdir(path):
    """Create the destination up front so I/O failures precede compute."""
    if path is None:
        return None
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise PermissionError(f"output directory {out} is not writable")
    return out


def _ordered_map(func, payloads, workers):
    if workers <= 1:
        return [func(q) for q in payloads]
    chunk = max(1, math.ceil(len(payloads) / (8 * workers)))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, payloads, chunksize=chunk))


_INSTANCE_CACHE: dict[str, SyntheticInstance] = {}


def _shared_instance(spec: GeneratorSpec) -> SyntheticInstance:
    """Per-process cache: trials share one design and ground truth."""
    key = config_hash(spec.to_dict())
    inst = _INSTANCE_CACHE.get(key)
    if inst is None:
        inst = generate(spec)
        _INSTANCE_CACHE[key] = inst
    return inst


def _selection_trial(payload):
    """One outer trial: fresh noise, every procedure, full penalty grid."""
    config, t = payload
    inst = _shared_instance(config.generator)
    X = inst.dataset.X
    truth = inst.truth
    noise = substream(config.seed, 1, t).standard_normal(X.shape[0])
    data = Dataset(X, X @ truth.weights + config.generator.noise_sigma * noise)
    mus = config.mu_grid.values()
    G, p = len(mus), data.p
    truth_mask = np.zeros(p, dtype=bool)
    truth_mask[sorted(truth.support)] = True

    plain = lasso_path(data)
    plain_support = np.zeros((G, p), dtype=bool)
    plain_sign_ok = np.zeros(G, dtype=bool)
    for g, mu in enumerate(mus):
        w = plain.weights_at(max(float(mu), plain.coverage_floor))
        s = sign_pattern(w)
        plain_support[g] = s != 0
        plain_sign_ok[g] = np.array_equal(s, truth.signs)

    procs = []
    for i, proc in enumerate(config.procedures):
        scheme = ReplicationScheme(proc.kind, proc.m,
                                   derive_seed(config.seed, 2, t, i))
        if proc.two_step:
            occ, clamped = two_step_support_grid(data, scheme, mus)
            plain_occ, _ = two_step_plain_grid(data, mus)
        else:
            extra = {}
            if proc.kind == "oracle_noise":
                extra = {"truth_weights": truth.weights,
                         "noise_sampler":
                             gaussian_noise(config.generator.noise_sigma)}
            occ, clamped = replication_support_grid(data, scheme, mus, **extra)
            plain_occ = plain_support
        exact = np.zeros((len(config.m_values), G), dtype=bool)
        superset = np.zeros_like(exact)
        for mi, m in enumerate(config.m_values):
            inter_m = plain_occ if m == 1 else occ[:m].all(axis=0)
            exact[mi] = (inter_m == truth_mask[None, :]).all(axis=1)
            superset[mi] = ~(truth_mask[None, :] & ~inter_m).any(axis=1)
        procs.append({"freq": occ.mean(axis=0), "inter": occ.all(axis=0),
                      "exact": exact, "superset": superset,
                      "clamped": int(clamped)})
    return {"plain_support": plain_support, "plain_sign_ok": plain_sign_ok,
            "procs": procs}


def _map_trials(config: ExperimentConfig, workers: int):
    payloads = [(config, t) for t in range(config.outer_trials)]
    return _ordered_map(_selection_trial, payloads, workers)


def _experiment_metadata(config: ExperimentConfig, proc=None) -> dict:
    meta = {"config_sha256": config_hash(config.to_dict()),
            "seed": config.seed, "outer_trials": config.outer_trials,
            "mu_min": config.mu_grid.lo, "mu_max": config.mu_grid.hi,
            "mu_count": config.mu_grid.count}
    if proc is not None:
        meta.update(proc.to_dict())
    return meta


def sweep_selection_probability(config: ExperimentConfig, workers: int = 1,
                                output_dir=None):
    """Per-variable selection probability matrices over the penalty grid.

    For each procedure, two matrices (variables x penalties): the mean
    within-trial replication frequency, and the probability that the
    variable survives the intersection. Returns {label: {mode: matrix}}
    with modes "replication_frequency" and "intersection"; saves each as
    selection_{label}_{mode}.csv when an output directory is set.
    """
    out = _resolve_outdir(config.output_dir if output_dir is None else output_dir)
    results = _map_trials(config, workers)
    T = float(config.outer_trials)
    mus = config.mu_grid.values()
    G, p = len(mus), config.generator.p
    col_labels = tuple(fmt(v) for v in mus)
    row_labels = tuple(str(j + 1) for j in range(p))
    matrices: dict[str, dict[str, ProbabilityMatrix]] = {}
    for i, proc in enumerate(config.procedures):
        freq = np.zeros((G, p))
        inter = np.zeros((G, p))
        clamped = 0
        for r in results:
            freq += r["procs"][i]["freq"]
            inter += r["procs"][i]["inter"]
            clamped += r["procs"][i]["clamped"]
        meta = _experiment_metadata(config, proc)
        meta["clamped_replications"] = clamped
        matrices[proc.label] = {}
        for mode, vals in (("replication_frequency", freq / T),
                           ("intersection", inter / T)):
            pm = ProbabilityMatrix("variable", row_labels, "mu", col_labels,
                                   vals.T, {**meta, "mode": mode})
            matrices[proc.label][mode] = pm
            if out is not None:
                pm.save(out / f"selection_{proc.label}_{mode}.csv")
    return matrices


def sweep_pattern_probability(config: ExperimentConfig, workers: int = 1,
                              output_dir=None):
    """Correct-pattern probability curves, one per replication count.

    Per procedure: P(intersected support = true support) on the penalty
    grid for every m in config.m_values (m = 1 is the plain fit), plus
    the coupled superset probability P(true support survives). Also
    reports the plain Lasso's exact-sign-pattern curve. Saves one
    pattern_{label}.csv per procedure with rows (mu, m, probability,
    trials), and pattern_plain_sign.csv.
    """
    if not config.m_values:
        raise InputError("pattern sweep needs nonempty m_values")
    for proc in config.procedures:
        bad = [m for m in config.m_values if m > proc.m]
        if bad:
            raise InputError(f"m_values {bad} exceed m={proc.m} for "
                             f"procedure {proc.label!r}")
    out = _resolve_outdir(config.output_dir if output_dir is None else output_dir)
    results = _map_trials(config, workers)
    T = config.outer_trials
    mus = config.mu_grid.values()
    M, G = len(config.m_values), len(mus)
    plain_sign = np.zeros(G)
    for r in results:
        plain_sign += r["plain_sign_ok"]
    plain_sign /= T
    schemes = {}
    for i, proc in enumerate(config.procedures):
        exact = np.zeros((M, G))
        superset = np.zeros((M, G))
        for r in results:
            exact += r["procs"][i]["exact"]
            superset += r["procs"][i]["superset"]
        exact /= T
        superset /= T
        schemes[proc.label] = {"m_values": config.m_values,
                               "exact": exact, "superset": superset}
        if out is not None:
            lines = ["mu,m,probability,trials"]
            for mi, m in enumerate(config.m_values):
                for g, mu in enumerate(mus):
                    lines.append(f"{fmt(mu)},{m},{fmt(exact[mi, g])},{T}")
            path = out / f"pattern_{proc.label}.csv"
            path.write_text("\n".join(lines) + "\n")
            write_json(path.with_name(path.stem + ".meta.json"),
                       _experiment_metadata(config, proc))
    if out is not None:
        lines = ["mu,probability,trials"]
        for g, mu in enumerate(mus):
            lines.append(f"{fmt(mu)},{fmt(plain_sign[g])},{T}")
        path = out / "pattern_plain_sign.csv"
        path.write_text("\n".join(lines) + "\n")
        write_json(path.with_name(path.stem + ".meta.json"),
                   _experiment_metadata(config))
    return {"mu": mus, "trials": T, "plain_sign": plain_sign,
            "schemes": schemes}


def _phase_block(payload):
    """Diagnostics on a block of fresh standard Gaussian designs."""
    config, ni, ji, d0, d1 = payload
    n = config.n_values[ni]
    j = config.j_values[ji]
    p = config.p
    cond = stab = qual = 0
    log_sum = 0.0
    for d in range(d0, d1):
        rng = substream(config.seed, 3, ni, ji, d)
        X = rng.standard_normal((n, p))
        w = np.zeros(p)
        w[:j] = rng.integers(0, 2, size=j) * 2.0 - 1.0
        moments = MomentForm(X.T @ X / n, np.zeros(p))
        try:
            report = assumption_check(moments, GroundTruth(w))
        except RankDeficiencyError:
            continue  # relevant block singular: neither condition holds
        cond += int(report.cond_satisfied)
        stab += int(report.stability_holds)
        if report.theta is not None and report.theta > 0:
            log_sum += math.log(report.theta)
            qual += 1
    return ni, ji, cond, stab, log_sum, qual


def sweep_condition_phase(config: PhaseConfig, workers: int = 1,
                          output_dir=None) -> PhaseResult:
    """Monte Carlo phase maps of the consistency diagnostics.

    Each cell draws fresh iid standard Gaussian designs with random
    signs on the leading j variables and records how often the
    consistency condition holds on the empirical moments, how often the
    stability condition holds, and the mean log stability margin over
    draws where unicity and stability both hold. j = 0 cells hold
    trivially and are flagged with NaN margins.
    """
    out = _resolve_outdir(config.output_dir if output_dir is None else output_dir)
    N, J = len(config.n_values), len(config.j_values)
    consistency = np.zeros((N, J))
    stability = np.zeros((N, J))
    log_theta = np.full((N, J), np.nan)
    qualifying = np.zeros((N, J), dtype=int)
    payloads = []
    for ni in range(N):
        for ji, j in enumerate(config.j_values):
            if j == 0:
                consistency[ni, ji] = 1.0
                stability[ni, ji] = 1.0
                continue
            for d0 in range(0, config.draws, _PHASE_BLOCK):
                payloads.append((config, ni, ji, d0,
                                 min(d0 + _PHASE_BLOCK, config.draws)))
    acc: dict[tuple[int, int], list] = {}
    for ni, ji, c, s, ls, q in _ordered_map(_phase_block, payloads, workers):
        cell = acc.setdefault((ni, ji), [0, 0, 0.0, 0])
        cell[0] += c
        cell[1] += s
        cell[2] += ls
        cell[3] += q
    for (ni, ji), (c, s, ls, q) in acc.items():
        consistency[ni, ji] = c / config.draws
        stability[ni, ji] = s / config.draws
        qualifying[ni, ji] = q
        if q:
            log_theta[ni, ji] = ls / q
    meta = {"config_sha256": config_hash(config.to_dict()),
            "seed": config.seed, "draws": config.draws, "p": config.p}
    result = PhaseResult(config.n_values, config.j_values, consistency,
                         stability, log_theta, qualifying, meta)
    if out is not None:
        result.save(out)
    return result
