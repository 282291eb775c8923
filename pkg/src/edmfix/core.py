"""Operators on Gram and distance matrices, block extraction and rank decisions.

All matrices are dense ``numpy`` arrays. Index sets are 0-based integer
sequences; only the CLI and the on-disk formats use 1-based indices.
"""
from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass

import numpy as np

from .exceptions import BlockNotGoodError, EDMError

__all__ = [
    "ToleranceConfig",
    "DEFAULT_TOL",
    "RankDecision",
    "BlockClass",
    "kappa",
    "kappa_dagger",
    "kappa_star",
    "centering_projector",
    "project_block",
    "embedding_dimension",
    "classify_block",
    "gram_from_config",
    "full_rank_factor",
    "unit_matrix",
    "read_matrix_csv",
    "write_matrix_csv",
]


@dataclass(frozen=True)
class ToleranceConfig:
    """Numerical thresholds shared by every module.

    Parameters
    ----------
    rel : float
        Eigenvalues with magnitude at most ``rel * max(1, |lambda|_max)`` count as zero.
    diff_abs, diff_rel : float
        An observed entry is considered changed by a completion when
        ``|D - recovered| > max(diff_abs, diff_rel * max(D))``.
    angle : float
        Two subspaces are equal when every principal-angle cosine is at least ``1 - angle``.
    """

    rel: float = 1e-8
    diff_abs: float = 1e-6
    diff_rel: float = 1e-6
    angle: float = 1e-8

    def threshold(self, scale):
        return self.rel * max(1.0, float(scale))

    def diff_threshold(self, D):
        D = np.asarray(D)
        top = float(D.max()) if D.size else 0.0
        return max(self.diff_abs, self.diff_rel * top)

    def scaled(self, factor):
        """Return a copy with every threshold multiplied by ``factor``."""
        return dataclasses.replace(
            self,
            rel=self.rel * factor,
            diff_abs=self.diff_abs * factor,
            diff_rel=self.diff_rel * factor,
            angle=self.angle * factor,
        )


DEFAULT_TOL = ToleranceConfig()


@dataclass(frozen=True)
class RankDecision:
    eigenvalues: np.ndarray
    numeric_rank: int
    num_negative: int
    tolerance_used: float

    @property
    def is_psd(self):
        return self.num_negative == 0


class BlockClass(enum.Enum):
    GOOD = "good"
    BAD = "bad"


def _as_square(M, name="matrix"):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise EDMError(f"{name} must be square, got shape {M.shape}")
    return M


def kappa(G):
    """Lindenstrauss operator: ``diag(G) e^T + e diag(G)^T - 2 G``."""
    G = _as_square(G, "G")
    g = np.diag(G)
    return g[:, None] + g[None, :] - 2.0 * G


def kappa_dagger(D):
    """Moore-Penrose inverse of :func:`kappa`: ``-1/2 J offDiag(D) J``.

    The diagonal of ``D`` is ignored, so the map is defined on any square input.
    Works on stacks of matrices (``(..., k, k)``) as well.
    """
    X = np.array(D, dtype=float)
    if X.ndim < 2 or X.shape[-1] != X.shape[-2]:
        raise EDMError(f"D must be square, got shape {X.shape}")
    k = X.shape[-1]
    idx = np.arange(k)
    X[..., idx, idx] = 0.0
    r = X.mean(axis=-1)
    m = r.mean(axis=-1)
    X -= r[..., :, None]
    X -= r[..., None, :]
    X += m[..., None, None]
    X *= -0.5
    return X


def kappa_star(D):
    """Adjoint of :func:`kappa`: ``2 (Diag(D e) - D)``."""
    D = _as_square(D, "D")
    return 2.0 * (np.diag(D.sum(axis=1)) - D)


def centering_projector(n):
    if n < 1:
        raise EDMError("n must be positive")
    return np.eye(n) - np.full((n, n), 1.0 / n)


def _check_index_set(alpha, n):
    alpha = np.asarray(alpha, dtype=int).ravel()
    if alpha.size and (alpha.min() < 0 or alpha.max() >= n):
        raise IndexError(f"index set out of range for order {n}")
    if np.unique(alpha).size != alpha.size:
        raise EDMError("index set contains duplicates")
    return alpha


def project_block(D, alpha):
    """Principal submatrix ``D[alpha, alpha]`` (coordinate shadow)."""
    D = _as_square(D, "D")
    alpha = _check_index_set(alpha, D.shape[0])
    return D[np.ix_(alpha, alpha)]


def embedding_dimension(G, tol=DEFAULT_TOL):
    """Spectrum, numeric rank and PSD flag of a symmetric matrix."""
    G = _as_square(G, "G")
    if G.shape[0] == 0:
        return RankDecision(np.empty(0), 0, 0, tol.threshold(0.0))
    lam = np.linalg.eigvalsh(G)
    return _decide(lam, tol)


def _decide(lam, tol):
    tau = tol.threshold(np.max(np.abs(lam)) if lam.size else 0.0)
    return RankDecision(
        eigenvalues=lam,
        numeric_rank=int(np.count_nonzero(lam > tau)),
        num_negative=int(np.count_nonzero(lam < -tau)),
        tolerance_used=tau,
    )


def _is_good(decision, d):
    return decision.is_psd and decision.numeric_rank == d


def classify_block(D, alpha, d, tol=DEFAULT_TOL):
    """GOOD iff ``K^dagger(D[alpha, alpha])`` is PSD with numeric rank exactly ``d``."""
    alpha = _check_index_set(alpha, np.shape(D)[0])
    if alpha.size < d + 1:
        raise EDMError(f"block of size {alpha.size} is smaller than d+1 = {d + 1}")
    decision = embedding_dimension(kappa_dagger(project_block(D, alpha)), tol)
    return BlockClass.GOOD if _is_good(decision, d) else BlockClass.BAD


def window_indices(starts, size):
    starts = np.asarray(starts, dtype=int)
    return starts[:, None] + np.arange(size)[None, :]


def classify_windows(D, index_rows, d, tol=DEFAULT_TOL, vectors=False):
    """Classify many equally sized principal blocks at once.

    ``index_rows`` is an ``(m, k)`` integer array, one block per row.
    Returns a boolean array ``good`` and the batched eigen-decomposition
    ``(lam, U)`` of the blocks' Gram matrices (``U`` only when ``vectors``).
    """
    D = np.asarray(D, dtype=float)
    idx = np.asarray(index_rows, dtype=int)
    blocks = D[idx[:, :, None], idx[:, None, :]]
    G = kappa_dagger(blocks)
    if vectors:
        lam, U = np.linalg.eigh(G)
    else:
        lam, U = np.linalg.eigvalsh(G), None
    scale = np.maximum(1.0, np.max(np.abs(lam), axis=1))
    tau = tol.rel * scale
    rank = np.count_nonzero(lam > tau[:, None], axis=1)
    neg = np.count_nonzero(lam < -tau[:, None], axis=1)
    good = (neg == 0) & (rank == d)
    return good, lam, U


def gram_from_config(P):
    """Centered Gram matrix ``(JP)(JP)^T`` of a configuration."""
    P = np.asarray(P, dtype=float)
    if P.ndim == 1:
        P = P[:, None]
    Pc = P - P.mean(axis=0, keepdims=True)
    return Pc @ Pc.T


def full_rank_factor(G, d, tol=DEFAULT_TOL, require_good=True):
    """``W`` with ``G = W W^T`` built from the ``d`` leading eigenpairs.

    Also returns the retained eigenvalues (ascending).
    """
    G = _as_square(G, "G")
    lam, U = np.linalg.eigh(G)
    if require_good:
        decision = _decide(lam, tol)
        if not _is_good(decision, d):
            raise BlockNotGoodError(
                f"Gram matrix has rank {decision.numeric_rank} and "
                f"{decision.num_negative} negative eigenvalues; expected PSD rank {d}"
            )
    top = lam[-d:] if d else lam[:0]
    W = U[:, lam.size - d:] * np.sqrt(np.clip(top, 0.0, None))
    return W, top


def unit_matrix(n, i, j):
    """``E_ij = e_i e_j^T + e_j e_i^T``."""
    E = np.zeros((n, n))
    E[i, j] = E[j, i] = 1.0
    return E


def check_symmetric(D, rtol=1e-9, name="D"):
    D = _as_square(D, name)
    scale = max(1.0, float(np.max(np.abs(D)))) if D.size else 1.0
    if np.max(np.abs(D - D.T), initial=0.0) > rtol * scale:
        raise EDMError(f"{name} is not symmetric")
    return D


def read_matrix_csv(path):
    """Read a full n-by-n CSV matrix, rejecting asymmetric input."""
    D = np.loadtxt(path, delimiter=",", ndmin=2)
    return check_symmetric(D)


def write_matrix_csv(path, D):
    np.savetxt(path, np.asarray(D, dtype=float), delimiter=",", fmt="%.17g")
