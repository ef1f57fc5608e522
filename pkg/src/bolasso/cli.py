"""Command line front end.

Subcommands: generate, path, bolasso, diagnose, sweep-selection,
sweep-pattern, sweep-phase. Each prints a one-line JSON summary on
success; failures print one JSON error line to stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .cholesky import PivotError
from .dataio import (
    config_hash,
    load_matrix,
    load_vector,
    read_json,
    save_matrix,
    save_path_table,
    write_json,
)
from .diagnostics import assumption_check, consistency_condition
from .harness import (
    ExperimentConfig,
    PhaseConfig,
    sweep_condition_phase,
    sweep_pattern_probability,
    sweep_selection_probability,
)
from .lasso import lasso_path
from .resampling import ReplicationScheme
from .selection import run_bolasso, run_two_step
from .synthetic import GeneratorSpec, generate
from .types import (
    CoverageError,
    Dataset,
    GroundTruth,
    InputError,
    MomentForm,
    compute_moments,
)

_ERRORS = (InputError, CoverageError, PivotError, np.linalg.LinAlgError,
           OSError, ValueError, KeyError, TypeError)


def _emit(obj) -> None:
    print(json.dumps(obj, sort_keys=True))


def _load_dataset(args) -> Dataset:
    X = load_matrix(args.design)
    y = load_vector(args.response)
    return Dataset(X, y)


def _cmd_generate(args) -> int:
    spec = GeneratorSpec(n=args.n, p=args.p, j_count=args.relevant,
                         noise_sigma=args.sigma, seed=args.seed,
                         covariance=args.covariance,
                         w_magnitude_range=(args.w_min, args.w_max),
                         want_condition=args.want,
                         spectrum_range=(args.spectrum_min, args.spectrum_max))
    inst = generate(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_matrix(out / "design.csv", inst.dataset.X)
    save_matrix(out / "response.csv", inst.dataset.y)
    save_matrix(out / "truth.csv", inst.truth.weights)
    cond = consistency_condition(
        MomentForm(inst.population_covariance, np.zeros(spec.p)), inst.truth)
    meta = {"config_sha256": config_hash(spec.to_dict()),
            "generator": spec.to_dict(), "seed": spec.seed,
            "retries": inst.retries, "population_condition_value": cond}
    write_json(out / "meta.json", meta)
    _emit({"command": "generate", "out": str(out), "n": spec.n, "p": spec.p,
           "population_condition_value": cond})
    return 0


def _cmd_path(args) -> int:
    data = _load_dataset(args)
    path = lasso_path(data, args.max_active)
    save_path_table(args.out, path)
    _emit({"command": "path", "out": args.out, "mu_max": path.mu_max,
           "breakpoints": len(path.breakpoints),
           "termination": path.termination,
           "coverage_floor": path.coverage_floor})
    return 0


def _cmd_bolasso(args) -> int:
    data = _load_dataset(args)
    scheme = ReplicationScheme(args.kind, args.m, args.seed)
    if args.two_step:
        run = run_two_step(data, args.mu, scheme)
    else:
        run = run_bolasso(data, args.mu, scheme)
    manifest = run.manifest()
    if args.out is not None:
        write_json(args.out, manifest)
    _emit(manifest)
    return 0


def _cmd_diagnose(args) -> int:
    data = _load_dataset(args)
    truth = GroundTruth(load_vector(args.truth))
    report = assumption_check(compute_moments(data), truth)
    payload = report.to_dict()
    if args.out is not None:
        write_json(args.out, payload)
    _emit(payload)
    return 0


def _sweep_config(args, cls):
    config = cls.from_dict(read_json(args.config))
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.out is not None:
        updates["output_dir"] = args.out
    if updates:
        config = dataclasses.replace(config, **updates)
    if config.output_dir is None:
        raise InputError("no output directory: pass --out or set output_dir "
                         "in the config file")
    return config


def _cmd_sweep_selection(args) -> int:
    config = _sweep_config(args, ExperimentConfig)
    matrices = sweep_selection_probability(config, workers=args.workers)
    files = sorted(f"selection_{label}_{mode}.csv"
                   for label, modes in matrices.items() for mode in modes)
    _emit({"command": "sweep-selection", "output_dir": config.output_dir,
           "files": files})
    return 0


def _cmd_sweep_pattern(args) -> int:
    config = _sweep_config(args, ExperimentConfig)
    curves = sweep_pattern_probability(config, workers=args.workers)
    files = sorted(f"pattern_{label}.csv" for label in curves["schemes"])
    files.append("pattern_plain_sign.csv")
    _emit({"command": "sweep-pattern", "output_dir": config.output_dir,
           "files": files})
    return 0


def _cmd_sweep_phase(args) -> int:
    config = _sweep_config(args, PhaseConfig)
    sweep_condition_phase(config, workers=args.workers)
    _emit({"command": "sweep-phase", "output_dir": config.output_dir,
           "files": ["phase_consistency.csv", "phase_stability.csv",
                     "phase_log_theta.csv", "phase_qualifying.csv"]})
    return 0


def _add_data_args(sub) -> None:
    sub.add_argument("--design", required=True, help="CSV design matrix (n x p)")
    sub.add_argument("--response", required=True, help="CSV response vector (n)")


def _add_sweep_args(sub) -> None:
    sub.add_argument("--config", required=True, help="JSON experiment config")
    sub.add_argument("--out", default=None, help="output directory")
    sub.add_argument("--workers", type=int, default=1,
                     help="process count (default 1)")
    sub.add_argument("--seed", type=int, default=None,
                     help="override the config seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bolasso",
        description="l1 path solver, intersected replicated selection, "
                    "consistency diagnostics, and experiment sweeps")
    subs = parser.add_subparsers(dest="command", required=True)

    gen = subs.add_parser("generate", help="write a synthetic problem")
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--p", type=int, required=True)
    gen.add_argument("--relevant", type=int, required=True,
                     help="count of nonzero truth weights")
    gen.add_argument("--sigma", type=float, default=0.1)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--covariance", choices=("identity", "random_spd"),
                     default="identity")
    gen.add_argument("--want", choices=("any", "satisfied", "violated"),
                     default="any", help="required consistency status of the "
                     "population covariance")
    gen.add_argument("--w-min", type=float, default=0.5)
    gen.add_argument("--w-max", type=float, default=1.5)
    gen.add_argument("--spectrum-min", type=float, default=1.0 / 3.0)
    gen.add_argument("--spectrum-max", type=float, default=3.0)
    gen.add_argument("--out", required=True, help="output directory")
    gen.set_defaults(func=_cmd_generate)

    path = subs.add_parser("path", help="trace a full regularization path")
    _add_data_args(path)
    path.add_argument("--max-active", type=int, default=None)
    path.add_argument("--out", required=True, help="CSV path table")
    path.set_defaults(func=_cmd_path)

    bol = subs.add_parser("bolasso", help="intersected replicated selection "
                                          "at one penalty")
    _add_data_args(bol)
    bol.add_argument("--mu", type=float, required=True)
    bol.add_argument("--kind", choices=("pairs", "residuals", "split"),
                     default="pairs")
    bol.add_argument("--m", type=int, default=128, help="replication count")
    bol.add_argument("--seed", type=int, default=0)
    bol.add_argument("--two-step", action="store_true",
                     help="screen at mu*ln(p) first, replicate inside")
    bol.add_argument("--out", default=None, help="JSON manifest file")
    bol.set_defaults(func=_cmd_bolasso)

    diag = subs.add_parser("diagnose", help="consistency diagnostics against "
                                            "known truth weights")
    _add_data_args(diag)
    diag.add_argument("--truth", required=True, help="CSV truth weights (p)")
    diag.add_argument("--out", default=None, help="JSON report file")
    diag.set_defaults(func=_cmd_diagnose)

    for name, func in (("sweep-selection", _cmd_sweep_selection),
                       ("sweep-pattern", _cmd_sweep_pattern),
                       ("sweep-phase", _cmd_sweep_phase)):
        sub = subs.add_parser(name, help=f"run the {name.split('-')[1]} sweep")
        _add_sweep_args(sub)
        sub.set_defaults(func=func)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _ERRORS as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
