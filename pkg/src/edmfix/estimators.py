"""scikit-learn style wrappers around the solvers and the nearest-EDM routine."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .analysis import nedm_solve
from .solvers import SOLVERS, NoisyInstance, solve
from .validation import check_dimension, check_distance_matrix, check_tolerance

__all__ = ["EDMCorrector", "NearestEDM"]


class EDMCorrector(TransformerMixin, BaseEstimator):
    """Find and repair the single corrupted entry of a distance matrix.

    ``fit`` locates the entry; ``transform`` returns the repaired matrix.
    Calling ``transform`` on a different matrix re-solves it, since the fitted
    correction only applies to the matrix it was computed from.

    Parameters
    ----------
    dim : int
        Embedding dimension of the clean matrix.
    method : {"mbfv", "biev", "sbgt", "hard"}, default="mbfv"
    tol : float or ToleranceConfig, optional
        A float multiplies every default threshold.
    fallback : bool, default=True
        Hand over to the hard-case solver when the chosen method cannot
        localize the entry.

    Attributes
    ----------
    report_ : SolveReport
    correction_ : Correction
        0-based indices.
    alpha_ : float
        Estimated error ``observed - corrected``.
    n_features_in_ : int

    Examples
    --------
    >>> from edmfix.instance import GenSpec, generate
    >>> inst = generate(GenSpec(n=40, d=2, seed=3))
    >>> est = EDMCorrector(dim=2).fit(inst.D)
    >>> (est.correction_.i, est.correction_.j) == inst.truth[:2]
    True
    """

    def __init__(self, dim=2, method="mbfv", tol=None, fallback=True):
        self.dim = dim
        self.method = method
        self.tol = tol
        self.fallback = fallback

    def _solve(self, D):
        D = check_distance_matrix(D)
        d = check_dimension(self.dim, D.shape[0])
        if self.method not in SOLVERS:
            raise ValueError(f"method must be one of {sorted(SOLVERS)}, got {self.method!r}")
        inst = NoisyInstance(D=D, d=d)
        return D, solve(inst, self.method, tol=check_tolerance(self.tol), fallback=self.fallback)

    def fit(self, X, y=None):
        """Locate the corrupted entry of ``X``.

        Parameters
        ----------
        X : array-like of shape (n, n)
        y : ignored
        """
        D, report = self._solve(X)
        self._fit_matrix = D
        self.report_ = report
        self.correction_ = report.correction
        self.alpha_ = report.correction.alpha_hat
        self.n_features_in_ = D.shape[1]
        return self

    def transform(self, X):
        """Return ``X`` with the corrupted entry replaced."""
        check_is_fitted(self, "report_")
        D = check_distance_matrix(X)
        if D.shape != self._fit_matrix.shape:
            raise ValueError(f"expected a {self._fit_matrix.shape} matrix, got {D.shape}")
        if np.array_equal(D, self._fit_matrix):
            return self.report_.recovered.copy()
        return self._solve(D)[1].recovered.copy()


class NearestEDM(TransformerMixin, BaseEstimator):
    """Project a symmetric hollow matrix onto the EDM cone (Frobenius norm).

    Parameters
    ----------
    max_iter : int, default=20000
    tol : float, default=1e-10
        Relative stopping threshold on the projected-gradient step.
    seed : int, default=0
        Seed of the power iteration estimating the step size.

    Attributes
    ----------
    result_ : NedmResult
    """

    def __init__(self, max_iter=20000, tol=1e-10, seed=0):
        self.max_iter = max_iter
        self.tol = tol
        self.seed = seed

    def fit(self, X, y=None):
        D = check_distance_matrix(X)
        self.result_ = nedm_solve(D, max_iter=self.max_iter, tol=self.tol, seed=self.seed)
        self.n_features_in_ = D.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "result_")
        D = check_distance_matrix(X)
        if D.shape[0] != self.n_features_in_:
            raise ValueError(f"expected order {self.n_features_in_}, got {D.shape[0]}")
        return nedm_solve(D, max_iter=self.max_iter, tol=self.tol, seed=self.seed).D_nearest

    def fit_transform(self, X, y=None, **fit_params):
        return self.fit(X).result_.D_nearest
