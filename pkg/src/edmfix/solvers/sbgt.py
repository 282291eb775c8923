"""Gale-transform solver over consecutive windows of order ``d + 2``."""
from __future__ import annotations

import time

import numpy as np

from ..core import DEFAULT_TOL, classify_windows, window_indices
from ..exceptions import GaleError, HardCaseNeeded
from ..gale import assemble_gale, facial_from_gale, recover_config
from ._common import (
    Method,
    _make_correction,
    build_report,
    locate_from_config,
    locate_in_small_block,
    refine_value,
)

__all__ = ["solve_sbgt"]


def solve_sbgt(inst, tol=DEFAULT_TOL, method="banded"):
    """Locate and correct the corrupted entry from a banded Gale matrix.

    Parameters
    ----------
    inst : NoisyInstance
    tol : ToleranceConfig
    method : {"banded", "dense"}
        How the facial vector is extracted from the Gale matrix.

    Returns
    -------
    SolveReport
    """
    t0 = time.perf_counter()
    D, d, n = inst.D, inst.d, inst.n
    b = d + 2
    if n < b + 1:
        raise HardCaseNeeded("instance too small for Gale windows")
    starts = np.arange(n - d - 1)
    good, _, _ = classify_windows(D, window_indices(starts, b), d, tol)
    bad = np.flatnonzero(~good)
    diag = {"windows": int(starts.size), "bad_windows": bad.tolist()}
    if bad.size:
        lo, hi = starts[bad[-1]], starts[bad[0]] + b
        I = np.arange(lo, hi)
        if I.size < 2:
            raise HardCaseNeeded("Bad windows share no pair of points")
        outside = np.setdiff1d(np.arange(n), I)
        outside = outside[np.argsort(np.abs(outside - I.mean()), kind="stable")]
        i, j = locate_in_small_block(D, I, d, outside, tol)
    else:
        try:
            N = assemble_gale(D, d, tol)
            V = facial_from_gale(N, tol, method=method)
        except GaleError as exc:
            raise HardCaseNeeded(str(exc)) from exc
        P, _ = recover_config(V, D, d, anchor=np.arange(b), tol=tol)
        i, j, _ = locate_from_config(D, P, tol)
    value = refine_value(D, i, j, d, tol)
    corr = _make_correction(D, i, j, value)
    return build_report(inst, corr, Method.SBGT, time.perf_counter() - t0, diag)
