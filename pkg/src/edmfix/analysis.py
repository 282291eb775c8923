"""Single-entry perturbation analysis and the nearest-EDM problem.

Contents
--------
* eigenpairs of ``K^dagger(E_ij)``;
* the interval of ``eps`` keeping ``D + eps E_ij`` an EDM, with the Schur
  complement condition that decides membership inside it;
* the test for perturbations that keep the embedding dimension;
* admissible replacement values for one entry (a small matrix pencil);
* a projected-gradient solver for the nearest EDM and the closed-form
  criterion for when it returns the uncorrupted matrix.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .core import (
    DEFAULT_TOL,
    _as_square,
    _decide,
    _is_good,
    check_symmetric,
    embedding_dimension,
    kappa,
    kappa_dagger,
    kappa_star,
    unit_matrix,
)
from .exceptions import EDMError
from .facial import orthonormal_complement

__all__ = [
    "perturbation_spectrum",
    "YieldAnalysis",
    "yielding_interval",
    "ManifoldDiagnosis",
    "check_restricted_yielding",
    "PencilEvaluator",
    "admissible_values",
    "NedmResult",
    "nedm_solve",
    "nedm_recovers_truth",
]


def _check_pair(n, i, j):
    i, j = int(i), int(j)
    if not (0 <= i < n and 0 <= j < n) or i == j:
        raise EDMError(f"invalid index pair ({i}, {j}) for order {n}")
    return (i, j) if i < j else (j, i)


def perturbation_spectrum(k, i, j):
    """Nonzero eigenpairs of ``K^dagger(E_ij)`` in order ``k``.

    Returns
    -------
    v_plus, lam_plus, v_minus, lam_minus
        ``v_plus = e_i - e_j`` with eigenvalue ``1/2`` and
        ``v_minus = (2/k) e - (e_i + e_j)`` with eigenvalue ``(2 - k) / (2k)``.
        Vectors are not normalized.
    """
    if k < 3:
        raise EDMError("order must be at least 3")
    i, j = _check_pair(k, i, j)
    vp = np.zeros(k)
    vp[i], vp[j] = 1.0, -1.0
    vm = np.full(k, 2.0 / k)
    vm[i] -= 1.0
    vm[j] -= 1.0
    return vp, 0.5, vm, (2.0 - k) / (2.0 * k)


def _validated_gram(D, d, tol):
    D = check_symmetric(D)
    G = kappa_dagger(D)
    lam, Q = np.linalg.eigh(G)
    decision = _decide(lam, tol)
    if not _is_good(decision, d) or np.any(np.diag(D) != 0):
        raise EDMError(
            f"D is not an EDM of embedding dimension {d} "
            f"(rank {decision.numeric_rank}, {decision.num_negative} negative eigenvalues)"
        )
    return G, lam, Q


@dataclass
class YieldAnalysis:
    """Interval of admissible perturbations of one entry.

    Attributes
    ----------
    interval : tuple of float
        Open interval ``(lo, hi)``; bounds may be infinite.
    G11, G12, G22 : ndarray
        Blocks of ``Q^T K^dagger(E_ij) Q`` with the trailing ``d`` rows/columns
        belonging to the positive eigenvalues ``lam_plus``.
    """

    D: np.ndarray
    i: int
    j: int
    d: int
    interval: tuple
    lam_plus: np.ndarray
    G11: np.ndarray
    G12: np.ndarray
    G22: np.ndarray
    tol: object = field(default=DEFAULT_TOL, repr=False)

    def schur_block(self, eps):
        """``G11 - eps G12 (Lambda_+ + eps G22)^{-1} G21``."""
        A = np.diag(self.lam_plus) + eps * self.G22
        return self.G11 - eps * self.G12 @ np.linalg.solve(A, self.G12.T)

    def contains(self, eps):
        lo, hi = self.interval
        return lo < eps < hi

    def edm_condition(self, eps):
        """Whether ``D + eps E_ij`` is an EDM (any embedding dimension).

        Inside the interval the sign of ``eps * schur_block(eps)`` decides;
        on or beyond the bounds the full Gram matrix is checked directly.
        """
        if eps == 0:
            return True
        if self.contains(eps):
            S = eps * self.schur_block(eps)
            S = 0.5 * (S + S.T)
            if S.size == 0:
                return True
            lam = np.linalg.eigvalsh(S)
            scale = max(1.0, float(np.max(self.lam_plus)))
            return bool(lam[0] >= -self.tol.rel * scale)
        return self.direct_is_edm(eps)

    def perturbed(self, eps):
        return self.D + eps * unit_matrix(self.D.shape[0], self.i, self.j)

    def direct_is_edm(self, eps):
        """Reference test: ``K^dagger(D + eps E_ij)`` is PSD."""
        return bool(embedding_dimension(kappa_dagger(self.perturbed(eps)), self.tol).is_psd)

    def rank_at(self, eps):
        return embedding_dimension(kappa_dagger(self.perturbed(eps)), self.tol).numeric_rank

    def grid(self, eps_values):
        """Evaluate :meth:`edm_condition` on a grid; returns a boolean array."""
        return np.array([self.edm_condition(float(e)) for e in eps_values])


def yielding_interval(D, i, j, d, tol=DEFAULT_TOL):
    """Interval of ``eps`` for which ``Lambda_+ + eps G22`` stays positive definite.

    Parameters
    ----------
    D : ndarray of shape (n, n)
        EDM of embedding dimension ``d``.
    i, j : int
        0-based entry.

    Returns
    -------
    YieldAnalysis

    Raises
    ------
    EDMError
        If ``D`` is not an EDM of embedding dimension ``d``.
    """
    D = _as_square(D, "D")
    n = D.shape[0]
    i, j = _check_pair(n, i, j)
    G, lam, Q = _validated_gram(D, d, tol)
    GE = Q.T @ kappa_dagger(unit_matrix(n, i, j)) @ Q
    z = n - d
    lam_plus = lam[z:]
    G11, G12, G22 = GE[:z, :z], GE[:z, z:], GE[z:, z:]
    s = 1.0 / np.sqrt(lam_plus)
    mu = np.linalg.eigvalsh(s[:, None] * G22 * s[None, :])
    eps_tol = tol.rel * max(1.0, float(np.max(np.abs(mu))))
    lo = -1.0 / mu[-1] if mu[-1] > eps_tol else -np.inf
    hi = -1.0 / mu[0] if mu[0] < -eps_tol else np.inf
    return YieldAnalysis(
        D=D, i=i, j=j, d=d, interval=(lo, hi), lam_plus=lam_plus,
        G11=G11, G12=G12, G22=G22, tol=tol,
    )


@dataclass(frozen=True)
class ManifoldDiagnosis:
    """Outcome of the restricted-yielding test.

    ``kind`` is ``"NotYielding"`` or ``"RestrictedYielding"``; in the latter
    case ``manifold_dim`` is the affine dimension spanned by all points other
    than ``i`` and ``j``.
    """

    kind: str
    manifold_dim: Optional[int] = None
    residual: float = 0.0

    @property
    def restricted(self):
        return self.kind == "RestrictedYielding"


def check_restricted_yielding(D, i, j, d, tol=DEFAULT_TOL):
    """Test whether ``range(K^dagger(E_ij))`` lies inside ``range(K^dagger(D))``."""
    D = _as_square(D, "D")
    n = D.shape[0]
    i, j = _check_pair(n, i, j)
    G, lam, Q = _validated_gram(D, d, tol)
    U = Q[:, n - d:]
    vp, _, vm, _ = perturbation_spectrum(n, i, j)
    B = np.column_stack([vp / np.linalg.norm(vp), vm / np.linalg.norm(vm)])
    resid = float(np.linalg.norm(B - U @ (U.T @ B)))
    if resid > np.sqrt(tol.rel):
        return ManifoldDiagnosis("NotYielding", None, resid)
    rest = np.setdiff1d(np.arange(n), [i, j])
    if rest.size <= 1:
        dim = 0
    else:
        dim = embedding_dimension(kappa_dagger(D[np.ix_(rest, rest)]), tol).numeric_rank
    return ManifoldDiagnosis("RestrictedYielding", int(dim), resid)


class PencilEvaluator:
    """Values of one entry that turn ``D`` into an EDM of embedding dimension ``d``.

    Replacing ``D[a, b]`` by ``D[a, b] + t`` moves the Gram matrix along the
    pencil ``G0 + t G_E`` with ``G_E = K^dagger(E_ab)`` of rank two. The
    spectrum of ``G0`` is computed once; each pair then reduces to a matrix
    of order at most ``rank(G0) + 2``.
    """

    def __init__(self, D, d, tol=DEFAULT_TOL):
        self.D = check_symmetric(D)
        self.n = self.D.shape[0]
        self.d = int(d)
        self.tol = tol
        lam, Q = np.linalg.eigh(kappa_dagger(self.D))
        decision = _decide(lam, tol)
        keep = np.abs(lam) > decision.tolerance_used
        self.lam = lam[keep]
        self.U = Q[:, keep]
        self.scale = max(1.0, float(np.max(np.abs(lam))) if lam.size else 1.0)

    def reduced(self, a, b):
        """Reduced pencil ``(A, B)`` for entry ``(a, b)`` on the joint range."""
        vp, _, vm, _ = perturbation_spectrum(self.n, a, b)
        F = np.column_stack([vp / np.linalg.norm(vp), vm / np.linalg.norm(vm)])
        R = F - self.U @ (self.U.T @ F)
        Ur, sr, _ = np.linalg.svd(R, full_matrices=False)
        extra = Ur[:, sr > np.sqrt(self.tol.rel)]
        W = np.hstack([self.U, extra])
        A = np.zeros((W.shape[1], W.shape[1]))
        r = self.lam.size
        A[:r, :r] = np.diag(self.lam)
        GE = 0.5 * np.outer(F[:, 0], F[:, 0]) + ((2.0 - self.n) / (2.0 * self.n)) * np.outer(
            F[:, 1], F[:, 1]
        )
        B = W.T @ GE @ W
        return A, 0.5 * (B + B.T)

    def _rank_d_psd(self, M):
        lam = np.linalg.eigvalsh(0.5 * (M + M.T))
        tau = self.tol.rel * self.scale
        return bool(lam[0] >= -tau and np.count_nonzero(lam > tau) == self.d)

    def shifts(self, a, b):
        """Admissible shifts ``t`` for entry ``(a, b)``.

        Returns
        -------
        points : list of float
            Isolated shifts (excluding ``t = 0``).
        interval : tuple or None
            Open interval of shifts when a whole range qualifies.
        """
        a, b = _check_pair(self.n, a, b)
        A, B = self.reduced(a, b)
        m, d = A.shape[0], self.d
        if m < d or m > d + 2:
            return [], None
        lamB, EB = np.linalg.eigh(B)
        on = np.abs(lamB) > self.tol.rel
        F, C = EB[:, on], lamB[on]
        Fp = EB[:, ~on]
        kB = F.shape[1]
        q = d - (m - kB)
        if q < 0:
            return [], None
        A11 = Fp.T @ A @ Fp
        if A11.size and np.min(np.abs(np.linalg.eigvalsh(A11))) <= self.tol.rel * self.scale:
            return self._qz_shifts(A, B), None
        A12 = Fp.T @ A @ F
        S0 = F.T @ A @ F - (A12.T @ np.linalg.solve(A11, A12) if A11.size else 0.0)
        S0 = 0.5 * (S0 + S0.T)
        Cm = np.diag(C)
        if q == kB:
            return [], self._pd_interval(A, B, S0, Cm)
        if kB - q == 1:
            cand = self._det_roots(S0, Cm)
        else:
            t = -float(np.sum(S0 * Cm) / np.sum(Cm * Cm))
            res = np.linalg.norm(S0 + t * Cm)
            cand = [t] if res <= np.sqrt(self.tol.rel) * max(1.0, np.linalg.norm(S0)) else []
        return self._accept(A, B, cand), None

    def _accept(self, A, B, cand):
        out = []
        zero = self.tol.diff_threshold(self.D)
        for t in cand:
            if abs(t) <= zero:
                continue
            if self._rank_d_psd(A + t * B):
                if all(abs(t - u) > 1e-9 * max(1.0, abs(u)) for u in out):
                    out.append(float(t))
        return sorted(out)

    @staticmethod
    def _det_roots(S0, C):
        if S0.shape[0] == 1:
            return [-S0[0, 0] / C[0, 0]]
        c2 = C[0, 0] * C[1, 1] - C[0, 1] ** 2
        c1 = S0[0, 0] * C[1, 1] + C[0, 0] * S0[1, 1] - 2.0 * S0[0, 1] * C[0, 1]
        c0 = S0[0, 0] * S0[1, 1] - S0[0, 1] ** 2
        roots = np.roots([c2, c1, c0])
        return [float(r.real) for r in roots if abs(r.imag) <= 1e-9 * max(1.0, abs(r))]

    def _qz_shifts(self, A, B):
        w = scipy.linalg.eigvals(A, -B, homogeneous_eigvals=True)
        alpha, beta = w
        finite = np.abs(beta) > 1e-12 * np.maximum(1.0, np.abs(alpha))
        t = alpha[finite] / beta[finite]
        t = t[np.abs(t.imag) <= 1e-8 * np.maximum(1.0, np.abs(t))].real
        return self._accept(A, B, list(t))

    def _pd_interval(self, A, B, S0, C):
        w = scipy.linalg.eigvals(S0, -C)
        br = np.sort([x.real for x in w if np.isfinite(x) and abs(x.imag) < 1e-9 * max(1, abs(x))])
        pts = np.concatenate([[-np.inf], br, [np.inf]])
        for lo, hi in zip(pts[:-1], pts[1:]):
            if np.isinf(lo) and np.isinf(hi):
                mid = 0.0
            elif np.isinf(lo):
                mid = hi - max(1.0, abs(hi))
            elif np.isinf(hi):
                mid = lo + max(1.0, abs(lo))
            else:
                mid = 0.5 * (lo + hi)
            if self._rank_d_psd(A + mid * B):
                return (float(lo), float(hi))
        return None

    def values(self, a, b):
        """Admissible replacement values for ``D[a, b]`` (see :meth:`shifts`)."""
        a, b = _check_pair(self.n, a, b)
        pts, iv = self.shifts(a, b)
        base = self.D[a, b]
        vals = [base + t for t in pts]
        if iv is not None:
            iv = (base + iv[0], base + iv[1])
        return vals, iv


def admissible_values(D, i, j, d, tol=DEFAULT_TOL):
    """Values ``v != D[i, j]`` making ``D`` with ``D[i, j] = v`` a rank-``d`` EDM."""
    return PencilEvaluator(D, d, tol).values(i, j)


@dataclass
class NedmResult:
    X_bar: np.ndarray
    D_nearest: np.ndarray
    converged: bool
    iterations: int
    objective: float
    history: list = field(default_factory=list, repr=False)


def _kv(V, X):
    return kappa(V @ X @ V.T)


def _kv_adj(V, Y):
    return V.T @ kappa_star(Y) @ V


def _psd_project(X):
    lam, U = np.linalg.eigh(0.5 * (X + X.T))
    lam = np.clip(lam, 0.0, None)
    return (U * lam) @ U.T


def _lipschitz(V, m, rng, iters=100):
    X = rng.standard_normal((m, m))
    X = X + X.T
    lam = 0.0
    for _ in range(iters):
        Y = _kv_adj(V, _kv(V, X))
        nrm = np.linalg.norm(Y)
        if nrm == 0:
            return 1.0
        lam_new = nrm / np.linalg.norm(X)
        X = Y / nrm
        if abs(lam_new - lam) <= 1e-10 * lam_new:
            lam = lam_new
            break
        lam = lam_new
    return lam * 1.01


def nedm_solve(D_n, max_iter=20000, tol=1e-10, seed=0):
    """Nearest EDM in Frobenius norm by projected gradient on the centered face.

    Minimizes ``1/2 ||K(V X V^T) - D_n||^2`` over ``X >= 0`` where ``V`` is an
    orthonormal basis of ``e^perp``.

    Parameters
    ----------
    D_n : ndarray of shape (n, n)
        Symmetric hollow matrix.
    max_iter : int
    tol : float
        Stop when the gradient-mapping norm falls below ``tol * max(1, ||D_n||)``.

    Returns
    -------
    NedmResult
    """
    D_n = check_symmetric(D_n)
    if np.any(np.diag(D_n) != 0):
        raise EDMError("D_n must be hollow")
    n = D_n.shape[0]
    V = orthonormal_complement(np.ones(n))
    m = n - 1
    L = _lipschitz(V, m, np.random.default_rng(seed))
    X = _psd_project(V.T @ kappa_dagger(D_n) @ V)

    def f(X):
        R = _kv(V, X) - D_n
        return 0.5 * float(np.sum(R * R)), R

    obj, R = f(X)
    history = [obj]
    stop = tol * max(1.0, float(np.linalg.norm(D_n)))
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        grad = _kv_adj(V, R)
        Xn = _psd_project(X - grad / L)
        step = L * np.linalg.norm(Xn - X)
        X = Xn
        obj, R = f(X)
        history.append(obj)
        if step <= stop:
            converged = True
            break
    return NedmResult(
        X_bar=X, D_nearest=_kv(V, X), converged=converged, iterations=it,
        objective=obj, history=history,
    )


def nedm_recovers_truth(D0, i, j, alpha, tol=DEFAULT_TOL):
    """Closed-form test: is ``D0`` the nearest EDM to ``D0 + alpha E_ij``?

    True exactly when ``D0[i, j] == 0`` (coincident points) and ``alpha < 0``.

    Raises
    ------
    EDMError
        If ``D0 + alpha E_ij`` is itself an EDM.
    """
    D0 = check_symmetric(D0)
    n = D0.shape[0]
    i, j = _check_pair(n, i, j)
    if alpha == 0:
        raise EDMError("alpha must be nonzero")
    if not embedding_dimension(kappa_dagger(D0), tol).is_psd:
        raise EDMError("D0 is not an EDM")
    Dn = D0 + alpha * unit_matrix(n, i, j)
    dec = embedding_dimension(kappa_dagger(Dn), tol)
    if dec.is_psd and Dn.min() >= 0:
        raise EDMError("D0 + alpha E_ij is already an EDM")
    zero = tol.diff_threshold(D0)
    return bool(abs(D0[i, j]) <= zero and alpha < 0)
