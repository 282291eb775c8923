"""Solver for instances that may violate general position.

An anchor of ``d + 1`` affinely independent points is located first; every
other point is then tested against it. The resulting Bad points narrow the
candidate pairs, and each candidate is settled by the pencil test, which
lists every value turning the matrix into an EDM of embedding dimension ``d``.
"""
from __future__ import annotations

import itertools
import time

import numpy as np

from ..analysis import PencilEvaluator
from ..core import DEFAULT_TOL, classify_windows, window_indices
from ..exceptions import NoCorruptionFound, SolverError, UnsolvableHardCase
from ..gale import gale_basis, zero_row_indices
from ._common import (
    Correction,
    Method,
    _make_correction,
    build_report,
    choose_clean_anchor,
    greedy_anchor,
    locate_from_config,
    refine_value,
    trilaterate,
)

__all__ = ["solve_hard", "find_anchor"]


def _consecutive_anchor(D, order, d, tol):
    order = np.asarray(order, dtype=int)
    if order.size < d + 1:
        return None
    starts = np.arange(order.size - d)
    idx = order[window_indices(starts, d + 1)]
    good, lam, _ = classify_windows(D, idx, d, tol)
    if not good.any():
        return None
    top = lam[:, -d:]
    cond = np.full(good.size, np.inf)
    cond[good] = top[good, -1] / top[good, 0]
    return np.sort(idx[int(np.argmin(cond))])


def _gale_scan(D, order, d, tol):
    """Points that are affinely independent of the rest of some window."""
    found = []
    for s in range(len(order) - d):
        w = order[s : s + d + 1]
        N = gale_basis(D[np.ix_(w, w)], tol)
        if N.shape[1]:
            found.extend(int(w[r]) for r in zero_row_indices(N, tol))
    return list(dict.fromkeys(found))


def find_anchor(D, d, tol=DEFAULT_TOL, max_depth=4):
    """``d + 1`` indices whose block has embedding dimension exactly ``d``.

    Consecutive blocks are scanned first. If none qualifies, points flagged by
    zero Gale rows are collected and the scan is repeated on those points
    followed by the first ``d + 1`` remaining ones. A greedy affine-rank
    search is the last resort.

    Returns
    -------
    anchor : ndarray of int
    route : str
        ``"consecutive"``, ``"gale"`` or ``"greedy"``.
    """
    n = D.shape[0]
    order = np.arange(n)
    a = _consecutive_anchor(D, order, d, tol)
    if a is not None:
        return a, "consecutive"
    for _ in range(max_depth):
        I = _gale_scan(D, order, d, tol)
        rest = [k for k in range(n) if k not in set(I)]
        new = np.array(I + rest[: d + 1], dtype=int)
        a = _consecutive_anchor(D, new, d, tol)
        if a is not None:
            return a, "gale"
        if new.size == order.size and np.array_equal(new, order):
            break
        order = np.concatenate([new, np.setdiff1d(np.arange(n), new)])
    a = greedy_anchor(D, np.arange(n), d, tol)
    if a is None:
        raise SolverError("no set of d+1 points has embedding dimension d")
    return np.sort(a), "greedy"


def _evaluate(ev, D, pairs):
    out = []
    for a, b in pairs:
        vals, iv = ev.values(a, b)
        for v in vals:
            out.append(_make_correction(D, a, b, v))
        if iv is not None:
            out.append(
                Correction(i=int(a), j=int(b), alpha_hat=float("nan"),
                           corrected_value=float("nan"), interval=iv)
            )
    return out


def solve_hard(inst, tol=DEFAULT_TOL):
    """Locate and correct the corrupted entry without assuming general position.

    Returns
    -------
    SolveReport

    Raises
    ------
    UnsolvableHardCase
        When more than one single-entry change yields an EDM of embedding
        dimension ``d``; ``candidates`` lists all of them.
    SolverError
        When no single-entry change works.
    """
    t0 = time.perf_counter()
    D, d, n = inst.D, inst.d, inst.n
    anchor, route = find_anchor(D, d, tol)
    diag = {"anchor": anchor.tolist(), "anchor_route": route}
    others = np.setdiff1d(np.arange(n), anchor)
    idx = np.hstack([np.broadcast_to(anchor, (others.size, d + 1)), others[:, None]])
    good, _, _ = classify_windows(D, idx, d, tol)
    bad = others[~good]
    diag["bad_points"] = bad.tolist()
    ev = PencilEvaluator(D, d, tol)
    inside = list(itertools.combinations(anchor.tolist(), 2))
    if bad.size == 0:
        _, Y = trilaterate(D, anchor, np.arange(n), d, tol)
        try:
            i, j, _ = locate_from_config(D, Y, tol)
            pairs = [(i, j)]
        except (NoCorruptionFound, SolverError):
            pairs = inside
    elif bad.size == 1:
        k = int(bad[0])
        pairs = [tuple(sorted((int(a), k))) for a in anchor]
    else:
        pairs = inside
    found = _evaluate(ev, D, pairs)
    if len(found) != 1:
        pool = sorted(set(anchor.tolist()) | set(bad.tolist()))
        wider = list(itertools.combinations(pool, 2))
        if len(wider) > len(pairs):
            found = _evaluate(ev, D, wider)
            diag["expanded_pairs"] = len(wider)
    diag["admissible"] = len(found)
    if not found:
        raise SolverError("no single-entry change gives an EDM of embedding dimension d")
    if len(found) > 1:
        raise UnsolvableHardCase(found)
    c = found[0]
    if c.interval is not None:
        raise UnsolvableHardCase(found, "a whole interval of values is admissible")
    try:
        clean = choose_clean_anchor(D, (c.i, c.j), d, tol)
        value = refine_value(D, c.i, c.j, d, tol, anchor=clean)
        if abs(value - c.corrected_value) > 1e-6 * max(1.0, abs(c.corrected_value)):
            value = c.corrected_value
    except SolverError:
        value = c.corrected_value
    corr = _make_correction(D, c.i, c.j, value)
    return build_report(inst, corr, Method.HARD, time.perf_counter() - t0, diag)
