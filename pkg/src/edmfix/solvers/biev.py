"""Bisection solver: split into two overlapping halves, recurse into the Bad one."""
from __future__ import annotations

import time

import numpy as np

from ..core import DEFAULT_TOL, BlockClass, classify_block
from ..exceptions import EDMError, HardCaseNeeded, SolverError
from ._common import (
    Method,
    _make_correction,
    build_report,
    complete_config,
    locate_from_config,
    locate_in_small_block,
    refine_value,
    split_indices,
)

__all__ = ["solve_biev"]


def _case3(D, S, d, tol, trace):
    outside = np.setdiff1d(np.arange(D.shape[0]), S)
    trace.append(("small_block", S.size))
    return locate_in_small_block(D, S, d, outside, tol)


def _locate(D, S, d, strategy, tol, trace):
    """Corrupted pair inside the active index set ``S`` (sorted, 0-based)."""
    max_depth = int(np.ceil(np.log2(max(D.shape[0], 2)))) + 2
    for _ in range(max_depth + 1):
        m = S.size
        try:
            h1, h2 = split_indices(m, d)
        except EDMError:
            return _case3(D, S, d, tol, trace)
        if max(h1.size, h2.size) >= m:
            # Halves no longer shrink (tiny m); search the whole set directly.
            return _case3(D, S, d, tol, trace)
        I1, I2 = S[h1], S[h2]
        c1 = classify_block(D, I1, d, tol)
        c2 = classify_block(D, I2, d, tol)
        trace.append((m, c1.value, c2.value))
        if c1 is BlockClass.BAD and c2 is BlockClass.GOOD:
            S = I1
        elif c2 is BlockClass.BAD and c1 is BlockClass.GOOD:
            S = I2
        elif c1 is BlockClass.GOOD:
            sub = D[np.ix_(S, S)]
            P = complete_config(sub, [h1, h2], d, strategy, tol)
            a, b, _ = locate_from_config(sub, P, tol)
            return int(S[a]), int(S[b])
        else:
            overlap = np.intersect1d(I1, I2)
            trace.append(("overlap", overlap.size))
            return _case3(D, overlap, d, tol, trace)
    raise HardCaseNeeded("bisection did not terminate")


def solve_biev(inst, tol=DEFAULT_TOL, strategy="directq"):
    """Locate and correct the corrupted entry by recursive bisection.

    Parameters
    ----------
    inst : NoisyInstance
    tol : ToleranceConfig
    strategy : {"directq", "lsq"}
        Completion strategy used when both halves are Good.

    Returns
    -------
    SolveReport

    Raises
    ------
    HardCaseNeeded
        When the search cannot isolate a unique pair.
    """
    t0 = time.perf_counter()
    D, d = inst.D, inst.d
    trace = []
    i, j = _locate(D, np.arange(inst.n), d, strategy, tol, trace)
    value = refine_value(D, i, j, d, tol)
    corr = _make_correction(D, i, j, value)
    return build_report(inst, corr, Method.BIEV, time.perf_counter() - t0, {"trace": trace})
