"""Input checks used by the estimators and the command line."""
from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils.validation import check_array

from .core import DEFAULT_TOL, ToleranceConfig, check_symmetric
from .exceptions import EDMError

__all__ = [
    "check_distance_matrix",
    "check_dimension",
    "check_pair",
    "check_tolerance",
]


def check_distance_matrix(D, allow_negative=True, rtol=1e-9):
    """Validate a square, symmetric, hollow matrix of squared distances.

    Parameters
    ----------
    D : array-like of shape (n, n)
    allow_negative : bool, default=True
        A corrupted entry may be negative; set to False for matrices that
        are supposed to be clean.
    rtol : float
        Relative asymmetry tolerated before raising.

    Returns
    -------
    ndarray of shape (n, n)
        Float copy, exactly symmetric.
    """
    D = check_array(D, dtype=np.float64, ensure_2d=True, ensure_min_samples=2, ensure_min_features=2)
    D = check_symmetric(D, rtol=rtol)
    D = 0.5 * (D + D.T)
    if np.any(np.diag(D) != 0):
        raise EDMError("D must have a zero diagonal")
    if not allow_negative and D.min() < 0:
        raise EDMError("D has negative entries")
    return D


def check_dimension(d, n):
    """Embedding dimension must be an integer in ``[1, n - 2]``."""
    if isinstance(d, bool) or not isinstance(d, numbers.Integral):
        raise EDMError(f"embedding dimension must be an integer, got {d!r}")
    d = int(d)
    if not 1 <= d <= n - 2:
        raise EDMError(f"embedding dimension {d} outside [1, {n - 2}] for n = {n}")
    return d


def check_pair(i, j, n):
    """Return ``(min, max)`` of two distinct 0-based indices inside ``[0, n)``."""
    i, j = int(i), int(j)
    if i == j:
        raise EDMError("indices must differ")
    if not (0 <= i < n and 0 <= j < n):
        raise EDMError(f"indices ({i}, {j}) out of range for n = {n}")
    return (i, j) if i < j else (j, i)


def check_tolerance(tol):
    """Accept ``None``, a positive scale factor or a :class:`ToleranceConfig`."""
    if tol is None:
        return DEFAULT_TOL
    if isinstance(tol, ToleranceConfig):
        return tol
    if isinstance(tol, numbers.Real) and tol > 0:
        return DEFAULT_TOL.scaled(float(tol))
    raise EDMError(f"tol must be positive or a ToleranceConfig, got {tol!r}")
