"""Sliding-window solver chaining small block faces into one facial vector."""
from __future__ import annotations

import time

import numpy as np

from ..core import DEFAULT_TOL, classify_windows, window_indices
from ..exceptions import HardCaseNeeded, OverlapRankError
from ..facial import intersect_facial, local_face
from ._common import (
    Method,
    _direct_q,
    _make_correction,
    build_report,
    locate_from_config,
    locate_in_small_block,
    refine_value,
)

__all__ = ["solve_mbfv", "window_layout", "chain_faces"]


def window_layout(n, d):
    """Starts and sizes of the windows: size ``2d + 6``, overlap ``d + 3``.

    The last window is shortened so that it ends at ``n``; every overlap has
    exactly ``d + 3`` rows.
    """
    w, step = 2 * d + 6, d + 3
    if n <= w:
        return np.array([0]), np.array([n])
    K = -(-(n - w) // step)
    starts = np.arange(K + 1) * step
    sizes = np.full(K + 1, w)
    sizes[-1] = n - starts[-1]
    return starts, sizes


def _window_faces(lam, U, d):
    k = U.shape[1]
    return np.concatenate([U[:, :, k - d:], np.full((U.shape[0], k, 1), 1.0 / np.sqrt(k))], axis=2)


def chain_faces(faces, starts, sizes, n, tol=DEFAULT_TOL):
    """Chain window bases ``[U_d, e/sqrt(k)]`` into one ``n x (d + 1)`` basis.

    Consecutive windows overlap in rows written by the previous step, so each
    intersection only touches the new rows. When the second branch of the
    intersection is chosen, the transform owed by all earlier rows is
    recorded and applied in one backward pass at the end.
    """
    r = faces[0].shape[1]
    U = np.empty((n, r))
    U[: sizes[0]] = faces[0]
    seg_start = [0]
    transforms = [None]
    branches = [1]
    prev_end = sizes[0]
    for t in range(1, len(faces)):
        s = starts[t]
        k = prev_end - s
        u1 = U[s:prev_end]
        out, branch = intersect_facial(u1, faces[t], (0, k, sizes[t] - k), tol, return_branch=True)
        if branch == 1:
            U[prev_end : s + sizes[t]] = out[k:]
            transforms.append(None)
            seg_start.append(prev_end)
        else:
            # out[:k] == faces[t][:k]; earlier rows owe pinv(U1'') U2''.
            M = np.linalg.pinv(u1) @ faces[t][:k]
            U[s : s + sizes[t]] = out
            transforms.append(M)
            seg_start.append(s)
        branches.append(branch)
        prev_end = s + sizes[t]
    cum = None
    bounds = seg_start + [n]
    for t in range(len(faces) - 1, -1, -1):
        if cum is not None:
            U[bounds[t] : bounds[t + 1]] = U[bounds[t] : bounds[t + 1]] @ cum
        M = transforms[t]
        if M is not None:
            cum = M if cum is None else M @ cum
    return U, branches


def solve_mbfv(inst, tol=DEFAULT_TOL):
    """Locate and correct the corrupted entry with minimal overlapping windows.

    Returns
    -------
    SolveReport

    Raises
    ------
    HardCaseNeeded
        When localization inside the Bad windows is ambiguous, the chained
        overlaps are not rigid, or ``n < d + 3``.
    """
    t0 = time.perf_counter()
    D, d, n = inst.D, inst.d, inst.n
    starts, sizes = window_layout(n, d)
    diag = {"windows": int(starts.size)}
    if starts.size == 1:
        # One window holds everything; test pairs against the other points.
        i, j = locate_in_small_block(D, np.arange(n), d, np.array([], dtype=int), tol)
        value = refine_value(D, i, j, d, tol)
        diag["bad_windows"] = [0]
        corr = _make_correction(D, i, j, value)
        return build_report(inst, corr, Method.MBFV, time.perf_counter() - t0, diag)
    full = sizes == sizes[0]
    good = np.empty(starts.size, dtype=bool)
    faces = [None] * starts.size
    g, lam, U = classify_windows(D, window_indices(starts[full], sizes[0]), d, tol, vectors=True)
    good[full] = g
    main = _window_faces(lam, U, d)
    for t, pos in enumerate(np.flatnonzero(full)):
        faces[pos] = main[t]
    for pos in np.flatnonzero(~full):
        idx = window_indices(starts[pos : pos + 1], sizes[pos])
        g, lam, U = classify_windows(D, idx, d, tol, vectors=True)
        good[pos] = g[0]
        faces[pos] = _window_faces(lam, U, d)[0]
    bad = np.flatnonzero(~good)
    diag["bad_windows"] = bad.tolist()
    if bad.size:
        I = np.arange(starts[bad[0]], starts[bad[0]] + sizes[bad[0]])
        for b in bad[1:]:
            I = np.intersect1d(I, np.arange(starts[b], starts[b] + sizes[b]))
        if I.size < 2:
            raise HardCaseNeeded("Bad windows share no pair of points")
        outside = np.setdiff1d(np.arange(n), I)
        # Clean points next to the Bad region first.
        outside = outside[np.argsort(np.abs(outside - I.mean()), kind="stable")]
        i, j = locate_in_small_block(D, I, d, outside, tol)
    else:
        try:
            Ug, branches = chain_faces(faces, starts, sizes, n, tol)
        except OverlapRankError as exc:
            raise HardCaseNeeded(f"chained faces failed: {exc}") from exc
        diag["branch2_steps"] = int(sum(b == 2 for b in branches))
        Uc = Ug - Ug.mean(axis=0, keepdims=True)
        Vs, sv, _ = np.linalg.svd(Uc, full_matrices=False)
        V = Vs[:, :d]
        P = _direct_q(V, D, np.arange(sizes[0]), d, tol)
        # Everything up to here touches O(n) entries; the scan below reads all of D.
        diag["time_config_s"] = time.perf_counter() - t0
        i, j, _ = locate_from_config(D, P, tol)
    value = refine_value(D, i, j, d, tol)
    corr = _make_correction(D, i, j, value)
    return build_report(inst, corr, Method.MBFV, time.perf_counter() - t0, diag)
