"""Single-entry error correction solvers."""
from ..exceptions import HardCaseNeeded, NoCorruptionFound, UnsolvableHardCase
from ._common import (
    Correction,
    Method,
    NoisyInstance,
    SolveReport,
    ValidationResult,
    complete_from_faces,
    locate_from_config,
    locate_in_small_block,
    refine_value,
    split_indices,
    trilaterate,
    validate_solution,
)
from .biev import solve_biev
from .hard import find_anchor, solve_hard
from .mbfv import solve_mbfv
from .sbgt import solve_sbgt

SOLVERS = {
    "biev": solve_biev,
    "mbfv": solve_mbfv,
    "sbgt": solve_sbgt,
    "hard": solve_hard,
}


def solve(inst, method="mbfv", tol=None, fallback=True, **kwargs):
    """Dispatch to a solver by name, handing over to ``solve_hard`` on ambiguity.

    Parameters
    ----------
    inst : NoisyInstance
    method : {"biev", "mbfv", "sbgt", "hard"}
    tol : ToleranceConfig, optional
    fallback : bool
        Retry with the hard-case solver when the chosen one raises
        :class:`HardCaseNeeded`.
    """
    from ..core import DEFAULT_TOL

    tol = DEFAULT_TOL if tol is None else tol
    try:
        fn = SOLVERS[method]
    except KeyError:
        raise ValueError(f"unknown method {method!r}") from None
    try:
        return fn(inst, tol=tol, **kwargs)
    except HardCaseNeeded:
        if not fallback or method == "hard":
            raise
        report = solve_hard(inst, tol=tol)
        report.diagnostics["fallback_from"] = method
        return report


__all__ = [
    "Correction",
    "HardCaseNeeded",
    "Method",
    "NoCorruptionFound",
    "NoisyInstance",
    "SOLVERS",
    "SolveReport",
    "UnsolvableHardCase",
    "ValidationResult",
    "complete_from_faces",
    "find_anchor",
    "locate_from_config",
    "locate_in_small_block",
    "refine_value",
    "solve",
    "solve_biev",
    "solve_hard",
    "solve_mbfv",
    "solve_sbgt",
    "split_indices",
    "trilaterate",
    "validate_solution",
]
