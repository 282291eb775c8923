"""Locate and correct a single corrupted entry of a Euclidean distance matrix."""
from .analysis import (
    PencilEvaluator,
    admissible_values,
    check_restricted_yielding,
    nedm_recovers_truth,
    nedm_solve,
    perturbation_spectrum,
    yielding_interval,
)
from .core import (
    DEFAULT_TOL,
    ToleranceConfig,
    classify_block,
    embedding_dimension,
    kappa,
    kappa_dagger,
    kappa_star,
)
from .estimators import EDMCorrector, NearestEDM
from .exceptions import (
    EDMError,
    HardCaseNeeded,
    NoCorruptionFound,
    SolverError,
    UnsolvableHardCase,
)
from .instance import GenSpec, brute_force_oracle, generate, load_instance, save_instance
from .solvers import (
    Correction,
    NoisyInstance,
    SolveReport,
    solve,
    solve_biev,
    solve_hard,
    solve_mbfv,
    solve_sbgt,
    validate_solution,
)

__version__ = "0.1.0"

__all__ = [
    "Correction",
    "DEFAULT_TOL",
    "EDMCorrector",
    "EDMError",
    "GenSpec",
    "HardCaseNeeded",
    "NearestEDM",
    "NoCorruptionFound",
    "NoisyInstance",
    "PencilEvaluator",
    "SolveReport",
    "SolverError",
    "ToleranceConfig",
    "UnsolvableHardCase",
    "admissible_values",
    "brute_force_oracle",
    "check_restricted_yielding",
    "classify_block",
    "embedding_dimension",
    "generate",
    "kappa",
    "kappa_dagger",
    "kappa_star",
    "load_instance",
    "nedm_recovers_truth",
    "nedm_solve",
    "perturbation_spectrum",
    "save_instance",
    "solve",
    "solve_biev",
    "solve_hard",
    "solve_mbfv",
    "solve_sbgt",
    "validate_solution",
    "yielding_interval",
]
