"""Generalized packing integer programs: LP relaxation, randomized and
pessimistic-estimator rounding, an exact oracle, and a meal-planning front end."""

from ._kernels import BACKEND
from .exact import ExactResult, solve_exact
from .lp import LinearProgram, LpSolution, relax, solve_lp
from .model import (
    BinarySolution,
    FeasibilityReport,
    GpipInstance,
    NormalizationRecord,
    ValidationReport,
    check_feasible,
    normalize,
    objective,
    validate,
)
from .pessimistic import (
    Calibration,
    EstimatorBreakdown,
    NoCertificate,
    Prefix,
    SolveResult,
    calibrate,
    derandomized_round,
    estimator,
    solve,
)
from .rounding import RoundingParams, ScaledSolution, best_of_trials, repair, sample_round, scale

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BinarySolution",
    "Calibration",
    "EstimatorBreakdown",
    "ExactResult",
    "FeasibilityReport",
    "GpipInstance",
    "LinearProgram",
    "LpSolution",
    "NoCertificate",
    "NormalizationRecord",
    "Prefix",
    "RoundingParams",
    "ScaledSolution",
    "SolveResult",
    "ValidationReport",
    "best_of_trials",
    "calibrate",
    "check_feasible",
    "derandomized_round",
    "estimator",
    "normalize",
    "objective",
    "relax",
    "repair",
    "sample_round",
    "scale",
    "solve",
    "solve_exact",
    "solve_lp",
    "validate",
]
