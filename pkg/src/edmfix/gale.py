"""Gale matrices of consecutive windows and configuration recovery from them."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .core import (
    DEFAULT_TOL,
    _as_square,
    _check_index_set,
    _decide,
    classify_windows,
    full_rank_factor,
    kappa,
    kappa_dagger,
    project_block,
    window_indices,
)
from .exceptions import BadWindowError, EDMError, GaleError

__all__ = [
    "GaleMatrix",
    "gale_of_block",
    "gale_basis",
    "assemble_gale",
    "facial_from_gale",
    "recover_config",
    "zero_row_indices",
    "gale_complete",
]


def _normalize(v):
    v = v / np.linalg.norm(v)
    nz = np.flatnonzero(np.abs(v) > 1e-14)
    if nz.size and v[nz[0]] < 0:
        v = -v
    return v


@dataclass(frozen=True)
class GaleMatrix:
    """Banded Gale matrix stored column by column.

    Column ``j`` is zero except rows ``starts[j] .. starts[j] + b - 1``,
    which hold ``vectors[j]`` (``b = d + 2``).
    """

    n: int
    d: int
    starts: np.ndarray
    vectors: np.ndarray

    @property
    def shape(self):
        return (self.n, self.starts.size)

    def toarray(self):
        N = np.zeros(self.shape)
        b = self.vectors.shape[1] if self.vectors.size else 0
        for j, (s, v) in enumerate(zip(self.starts, self.vectors)):
            N[s : s + b, j] = v
        return N

    def rmatvec(self, P):
        """``N^T P`` without forming ``N``."""
        P = np.asarray(P, dtype=float)
        b = self.vectors.shape[1]
        rows = P[window_indices(self.starts, b)]
        return np.einsum("jb,jb...->j...", self.vectors, rows)


def gale_basis(D_block, tol=DEFAULT_TOL):
    """Orthonormal basis of ``null([G; e^T])`` with ``G = K^dagger(D_block)``.

    The basis dimension is whatever the spectrum says; the rows of the
    result record the affine dependencies among the block's points.
    """
    G = kappa_dagger(_as_square(D_block, "D_block"))
    k = G.shape[0]
    lam, U = np.linalg.eigh(G + np.full((k, k), 1.0 / k) * max(1.0, np.max(np.abs(G))))
    tau = tol.threshold(np.max(np.abs(lam)))
    return U[:, np.abs(lam) <= tau]


def gale_of_block(D_block, d, tol=DEFAULT_TOL):
    """Unit Gale vector of a Good block of order ``d + 2``.

    Raises
    ------
    GaleError
        When the null space of ``[G; e^T]`` is not one-dimensional or the
        block is not PSD.
    """
    D_block = _as_square(D_block, "D_block")
    if D_block.shape[0] != d + 2:
        raise EDMError(f"block must have order d+2 = {d + 2}")
    decision = _decide(np.linalg.eigvalsh(kappa_dagger(D_block)), tol)
    if not decision.is_psd:
        raise GaleError("block Gram matrix is not PSD")
    N = gale_basis(D_block, tol)
    if N.shape[1] != 1:
        raise GaleError(f"nullspace dimension is {N.shape[1]}, expected 1")
    return _normalize(N[:, 0])


def _batched_gale(D, starts, d, tol):
    b = d + 2
    idx = window_indices(starts, b)
    good, lam, U = classify_windows(D, idx, d, tol)
    if not np.all(good):
        return good, None
    blocks = D[idx[:, :, None], idx[:, None, :]]
    G = kappa_dagger(blocks)
    scale = np.maximum(1.0, np.max(np.abs(lam), axis=1))
    G += scale[:, None, None] / b
    _, vecs = np.linalg.eigh(G)
    V = vecs[:, :, 0]
    V /= np.linalg.norm(V, axis=1, keepdims=True)
    first = V[np.arange(V.shape[0]), np.argmax(np.abs(V) > 1e-14, axis=1)]
    V *= np.where(first < 0, -1.0, 1.0)[:, None]
    return good, V


def assemble_gale(D, d, tol=DEFAULT_TOL):
    """Banded Gale matrix from all consecutive windows of order ``d + 2``.

    Raises
    ------
    BadWindowError
        Carrying the 0-based start of the first Bad window.
    """
    D = _as_square(D, "D")
    n = D.shape[0]
    if n < d + 2:
        raise EDMError(f"need at least d+2 = {d + 2} points")
    starts = np.arange(n - d - 1)
    good, V = _batched_gale(D, starts, d, tol)
    if V is None:
        raise BadWindowError(int(np.flatnonzero(~good)[0]))
    return GaleMatrix(n=n, d=d, starts=starts, vectors=V)


def _householder(x):
    """Reflector ``I - 2 v v^T`` mapping ``x`` onto a multiple of ``e_1``."""
    v = x.copy()
    nx = np.linalg.norm(x)
    if nx == 0.0:
        return np.zeros_like(x)
    v[0] += np.copysign(nx, x[0]) if x[0] != 0 else nx
    return v / np.linalg.norm(v)


def _banded_complement(N):
    """Last ``n - m`` columns of ``Q`` in ``N = QR`` for a consecutive-band Gale matrix."""
    n, m = N.shape
    b = N.vectors.shape[1]
    vals = N.vectors
    reflectors = np.empty((m, b))
    # Buffer holds rows j..j+b-1 and columns j..j+b-1 of the partial reduction.
    B = np.zeros((b, b))
    for c in range(min(b, m)):
        B[c:, c] = vals[c, : b - c]
    for j in range(m):
        v = _householder(B[:, 0])
        reflectors[j] = v
        B -= 2.0 * np.outer(v, v @ B)
        if j + 1 == m:
            break
        nxt = np.zeros((b, b))
        nxt[: b - 1, : b - 1] = B[1:, 1:]
        # Row j+b holds entries of the still untouched columns j+1..j+b.
        row = j + b
        if row < n:
            for c in range(j + 1, min(j + b, m - 1) + 1):
                off = row - c
                if 0 <= off < b:
                    nxt[b - 1, c - j - 1] = vals[c, off]
        B = nxt
    X = np.zeros((n, n - m))
    X[m:, :] = np.eye(n - m)
    for j in range(m - 1, -1, -1):
        v = reflectors[j]
        blk = X[j : j + b]
        blk -= 2.0 * np.outer(v, v @ blk)
    return X


def facial_from_gale(N, tol=DEFAULT_TOL, method="banded"):
    """Centered orthonormal ``V`` spanning ``null([N^T; e^T])``.

    Parameters
    ----------
    N : GaleMatrix or ndarray of shape (n, m)
        Gale matrix of full column rank.
    method : {"banded", "dense"}
        ``"banded"`` runs a Householder QR that touches only the band of a
        consecutive-window :class:`GaleMatrix`; ``"dense"`` uses an SVD.
    """
    if isinstance(N, GaleMatrix):
        n, m = N.shape
        d = N.d
        if method == "banded" and m > 0:
            X = _banded_complement(N)
        else:
            X = None
            Nd = N.toarray()
    else:
        Nd = np.asarray(N, dtype=float)
        if Nd.ndim != 2:
            raise EDMError("N must be a matrix")
        n, m = Nd.shape
        d = None
        X = None
    if X is None:
        A = np.hstack([Nd, np.ones((n, 1))]).T if m else np.ones((1, n))
        X = scipy.linalg.null_space(A, rcond=tol.rel)
        if d is not None and X.shape[1] != d:
            raise GaleError(f"nullspace dimension {X.shape[1]} differs from d={d}")
        return X
    Xc = X - X.mean(axis=0, keepdims=True)
    U, s, _ = np.linalg.svd(Xc, full_matrices=False)
    r = int(np.count_nonzero(s > 0.5))
    if r != d:
        raise GaleError(f"nullspace dimension {r} differs from d={d}")
    return U[:, :d]


def recover_config(V, D, d, anchor=None, tol=DEFAULT_TOL, solver="lstsq"):
    """Configuration ``P0 = V Q`` matching the anchor block's distances.

    Solves ``J V_1 Q = V0_1`` where ``V0_1`` is a full-rank factor of the
    anchor Gram matrix.

    Parameters
    ----------
    V : ndarray of shape (n, d)
        Centered facial vector.
    D : ndarray of shape (n, n)
        Distance matrix; only the anchor block is read.
    anchor : sequence of int, optional
        Good block indices. Defaults to the first ``d + 2`` points.
    solver : {"lstsq", "normal"}
        Least squares on the anchor rows, or the explicit normal-equations
        formula ``(V_1^T J V_1)^{-1} V_1^T V0_1``.

    Returns
    -------
    P0 : ndarray of shape (n, d)
    Q : ndarray of shape (d, d)
    """
    V = np.asarray(V, dtype=float)
    D = _as_square(D, "D")
    n = D.shape[0]
    if anchor is None:
        anchor = np.arange(min(n, d + 2))
    anchor = _check_index_set(anchor, n)
    W, _ = full_rank_factor(kappa_dagger(project_block(D, anchor)), d, tol)
    V1 = V[anchor]
    JV1 = V1 - V1.mean(axis=0, keepdims=True)
    s = np.linalg.svd(JV1, compute_uv=False)
    if s.size < d or s[d - 1] <= tol.threshold(s[0]) * anchor.size:
        raise EDMError("centered anchor rows of V are rank deficient")
    if solver == "lstsq":
        Q = np.linalg.lstsq(JV1, W, rcond=None)[0]
    elif solver == "normal":
        Q = np.linalg.solve(V1.T @ JV1, V1.T @ W)
    else:
        raise ValueError(f"unknown solver {solver!r}")
    return V @ Q, Q


def zero_row_indices(N_block, tol=DEFAULT_TOL):
    """Rows of a Gale basis whose norm vanishes relative to the whole block."""
    N = np.atleast_2d(np.asarray(N_block, dtype=float))
    if N.size == 0:
        return np.arange(N.shape[0])
    norms = np.linalg.norm(N, axis=1)
    scale = np.linalg.norm(N)
    return np.flatnonzero(norms <= tol.rel * 1e2 * scale)


def gale_complete(D, d, tol=DEFAULT_TOL, anchor=None, method="banded"):
    """Rebuild a rank-``d`` EDM from its consecutive ``d + 2`` windows only.

    Entries outside every window are never read.
    """
    N = assemble_gale(D, d, tol)
    V = facial_from_gale(N, tol, method=method)
    P0, _ = recover_config(V, D, d, anchor=anchor, tol=tol)
    Pc = P0 - P0.mean(axis=0)
    return kappa(Pc @ Pc.T), P0
