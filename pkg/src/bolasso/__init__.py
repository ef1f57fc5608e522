"""Lasso paths, bootstrapped support intersection, and consistency diagnostics."""

from .types import (
    Dataset,
    GroundTruth,
    InputError,
    CoverageError,
    MomentForm,
    RankDeficiencyError,
    compute_moments,
    sign_pattern,
    support_of,
)
from .lasso import (
    LassoSolution,
    PathSegment,
    RegularizationPath,
    ResidualPathFactory,
    error_bound,
    kkt_check,
    lasso_path,
    lasso_path_from_moments,
    refit_ols,
    solve_at,
)
from .resampling import (
    ReplicationScheme,
    bootstrap_pairs,
    bootstrap_residuals,
    compute_residuals,
    derive_seed,
    gaussian_noise,
    split_pieces,
    substream,
)
from .selection import (
    SelectionRun,
    intersect_supports,
    lasso_support_grid,
    replication_support_grid,
    run_bolasso,
    run_two_step,
    step_one_support,
    two_step_plain_grid,
    two_step_support_grid,
)
from .diagnostics import (
    DiagnosticsReport,
    assumption_check,
    consistency_condition,
    local_problem,
    stability_theta,
)
from .synthetic import GeneratorSpec, SyntheticInstance, generate, random_unit_covariance
from .harness import (
    ExperimentConfig,
    MuGrid,
    PhaseConfig,
    PhaseResult,
    ProbabilityMatrix,
    ProcedureSpec,
    sweep_condition_phase,
    sweep_pattern_probability,
    sweep_selection_probability,
)

__all__ = [
    "Dataset",
    "GroundTruth",
    "InputError",
    "CoverageError",
    "MomentForm",
    "RankDeficiencyError",
    "compute_moments",
    "sign_pattern",
    "support_of",
    "LassoSolution",
    "PathSegment",
    "RegularizationPath",
    "ResidualPathFactory",
    "error_bound",
    "kkt_check",
    "lasso_path",
    "lasso_path_from_moments",
    "refit_ols",
    "solve_at",
    "ReplicationScheme",
    "bootstrap_pairs",
    "bootstrap_residuals",
    "compute_residuals",
    "derive_seed",
    "gaussian_noise",
    "split_pieces",
    "substream",
    "SelectionRun",
    "intersect_supports",
    "lasso_support_grid",
    "replication_support_grid",
    "run_bolasso",
    "run_two_step",
    "step_one_support",
    "two_step_plain_grid",
    "two_step_support_grid",
    "DiagnosticsReport",
    "assumption_check",
    "consistency_condition",
    "local_problem",
    "stability_theta",
    "GeneratorSpec",
    "SyntheticInstance",
    "generate",
    "random_unit_covariance",
    "ExperimentConfig",
    "MuGrid",
    "PhaseConfig",
    "PhaseResult",
    "ProbabilityMatrix",
    "ProcedureSpec",
    "sweep_condition_phase",
    "sweep_pattern_probability",
    "sweep_selection_probability",
]

__version__ = "0.1.0"
