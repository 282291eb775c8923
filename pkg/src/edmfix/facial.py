"""Exposing vectors, facial vectors and the intersection of two block faces."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .core import (
    DEFAULT_TOL,
    _as_square,
    _check_index_set,
    _decide,
    _is_good,
    kappa_dagger,
    project_block,
)
from .exceptions import BlockNotGoodError, EDMError, OverlapRankError

__all__ = [
    "BlockFace",
    "exposing_from_gram",
    "sum_exposing",
    "facial_from_exposing",
    "block_facial_vector",
    "local_face",
    "intersect_facial",
    "ranges_equal",
    "orthonormal_complement",
]


@dataclass(frozen=True)
class BlockFace:
    """Face of the centered PSD cone determined by one Good block.

    Attributes
    ----------
    alpha : ndarray of int
        Block indices (0-based).
    facial : ndarray of shape (n, n - k + d)
        Orthonormal, centered facial vector in the ambient order ``n``.
    local : ndarray of shape (k, d + 1)
        Block basis ``[U_d, e / sqrt(k)]`` used by the intersection routine.
    """

    alpha: np.ndarray
    facial: np.ndarray
    local: np.ndarray


def _top_eigvecs(G, d, tol):
    lam, U = np.linalg.eigh(G)
    decision = _decide(lam, tol)
    if not _is_good(decision, d):
        raise BlockNotGoodError(
            f"block Gram has rank {decision.numeric_rank} with "
            f"{decision.num_negative} negative eigenvalues; expected PSD rank {d}"
        )
    return U[:, lam.size - d:]


def exposing_from_gram(G, d, tol=DEFAULT_TOL):
    """Maximal-rank centered exposing vector ``Z = N N^T`` of a rank-``d`` Gram matrix.

    ``N`` spans the null space of ``G`` inside ``e^perp``, so ``Z = J - U_d U_d^T``
    with ``U_d`` the leading eigenvectors.
    """
    G = _as_square(G, "G")
    k = G.shape[0]
    Ud = _top_eigvecs(G, d, tol)
    Z = np.eye(k) - np.full((k, k), 1.0 / k) - Ud @ Ud.T
    return 0.5 * (Z + Z.T)


def sum_exposing(blocks, n):
    """Embed each ``(alpha, Z_alpha)`` at its block position and add them up."""
    Z = np.zeros((n, n))
    for alpha, Zi in blocks:
        alpha = _check_index_set(alpha, n)
        Zi = np.asarray(Zi, dtype=float)
        if Zi.shape != (alpha.size, alpha.size):
            raise EDMError("exposing vector does not match its index set")
        Z[np.ix_(alpha, alpha)] += Zi
    return Z


def facial_from_exposing(Z, tol=DEFAULT_TOL, dim=None):
    """Orthonormal basis of ``null([Z e]^T)``.

    Parameters
    ----------
    Z : ndarray of shape (n, n)
        Centered PSD exposing vector.
    dim : int, optional
        Expected face dimension. When given only the ``dim`` smallest
        eigenpairs are computed; otherwise the dimension is read off the
        spectrum using ``tol``.
    """
    Z = _as_square(Z, "Z")
    n = Z.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    # Shift e into the positive spectrum so that only null([Z e]^T) stays at zero.
    M = Z + np.full((n, n), 1.0 / n)
    if dim is not None:
        if dim == 0:
            return np.zeros((n, 0))
        lam, V = scipy.linalg.eigh(M, subset_by_index=[0, dim - 1])
        return V
    lam, V = np.linalg.eigh(M)
    tau = tol.threshold(np.max(np.abs(lam)))
    return V[:, lam <= tau]


def orthonormal_complement(w):
    """Orthonormal basis of the complement of a nonzero vector ``w``."""
    w = np.asarray(w, dtype=float).ravel()
    Q, _ = np.linalg.qr(w[:, None], mode="complete")
    return Q[:, 1:]


def local_face(D, alpha, d, tol=DEFAULT_TOL):
    """``[U_d, e / sqrt(k)]`` for a Good block, with ``U_d`` its leading eigenvectors."""
    G = kappa_dagger(project_block(D, alpha))
    k = G.shape[0]
    Ud = _top_eigvecs(G, d, tol)
    return np.hstack([Ud, np.full((k, 1), 1.0 / np.sqrt(k))])


def block_facial_vector(D, alpha, d, tol=DEFAULT_TOL):
    """Ambient facial vector of the minimal face for a Good block.

    Builds ``U = blkdiag([U_d, e/sqrt(k)], I)`` in the original ordering and
    returns ``U V`` where ``V`` spans the complement of ``U^T e``.
    """
    D = _as_square(D, "D")
    n = D.shape[0]
    alpha = _check_index_set(alpha, n)
    k = alpha.size
    UG = local_face(D, alpha, d, tol)
    rest = np.setdiff1d(np.arange(n), alpha)
    U = np.zeros((n, d + 1 + rest.size))
    U[alpha, : d + 1] = UG
    U[rest, d + 1:] = np.eye(rest.size)
    V = orthonormal_complement(U.T @ np.ones(n))
    facial = U @ V
    assert facial.shape[1] == n - k + d
    return BlockFace(alpha=alpha, facial=facial, local=UG)


def _svd_checked(M, tol):
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    ok = s.size > 0 and s[-1] > tol.rel * s[0]
    return U, s, Vt, bool(ok)


def _angles_ok(UA, UB, tol):
    cosines = np.linalg.svd(UA.T @ UB, compute_uv=False)
    return bool(np.all(cosines >= 1.0 - tol.angle))


def ranges_equal(A, B, tol=DEFAULT_TOL):
    """True when ``A`` and ``B`` have full column rank and identical ranges.

    Ranges are compared through the cosines of their principal angles.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape != B.shape:
        return False
    UA, _, _, okA = _svd_checked(A, tol)
    UB, _, _, okB = _svd_checked(B, tol)
    return okA and okB and _angles_ok(UA, UB, tol)


def intersect_facial(u1, u2, layout, tol=DEFAULT_TOL, return_branch=False):
    """Basis for the intersection of two overlapping block faces.

    Parameters
    ----------
    u1 : ndarray of shape (s1 + k, r + 1)
        Rows for the first block, overlap rows last.
    u2 : ndarray of shape (k + s2, r + 1)
        Rows for the second block, overlap rows first.
    layout : tuple of int
        ``(s1, k, s2)``.
    return_branch : bool
        Also return which pseudoinverse branch was used (1 or 2).

    Returns
    -------
    ndarray of shape (s1 + k + s2, r + 1)
        Branch 1 keeps ``u1`` and maps the tail of ``u2`` through
        ``pinv(U2'') U1''``; branch 2 keeps ``u2`` and maps the head of ``u1``.
        The better conditioned overlap block is the one inverted.
    """
    s1, k, s2 = (int(v) for v in layout)
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    if u1.shape[0] != s1 + k or u2.shape[0] != k + s2 or u1.shape[1] != u2.shape[1]:
        raise EDMError("facial vectors do not match the given layout")
    U1a, U1o = u1[:s1], u1[s1:]
    U2o, U2b = u2[:k], u2[k:]
    L1, sv1, R1, ok1 = _svd_checked(U1o, tol)
    L2, sv2, R2, ok2 = _svd_checked(U2o, tol)
    if not (ok1 and ok2 and _angles_ok(L1, L2, tol)):
        raise OverlapRankError("overlap rows are rank deficient or span different ranges")
    c1 = sv1[0] / sv1[-1]
    c2 = sv2[0] / sv2[-1]
    if c2 <= c1:
        branch = 1
        pinv2 = (R2.T / sv2) @ L2.T
        out = np.vstack([U1a, U1o, U2b @ (pinv2 @ U1o)])
    else:
        branch = 2
        pinv1 = (R1.T / sv1) @ L1.T
        out = np.vstack([U1a @ (pinv1 @ U2o), U2o, U2b])
    return (out, branch) if return_branch else out
