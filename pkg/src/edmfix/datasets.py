"""Small reference matrices with known structure, used in tests and docs.

All indices in this module are 0-based.
"""
from __future__ import annotations

import numpy as np

from .core import gram_from_config, kappa

__all__ = [
    "gale_example",
    "gale_example_config",
    "hard_example",
    "hard_example_config",
    "HARD_SUITE",
]


def gale_example():
    """6 x 6 EDM of six points in the plane (embedding dimension 2)."""
    U = np.array(
        [
            [0, 2, 5, 9, 5, 2],
            [0, 0, 1, 5, 5, 4],
            [0, 0, 0, 2, 4, 5],
            [0, 0, 0, 0, 2, 5],
            [0, 0, 0, 0, 0, 1],
            [0, 0, 0, 0, 0, 0],
        ],
        dtype=float,
    )
    return U + U.T


def gale_example_config():
    """A configuration realizing :func:`gale_example`."""
    return 0.5 * np.array([[0, -3], [-2, -1], [-2, 1], [0, 3], [2, 1], [2, -1]], dtype=float)


def hard_example_config():
    """Six points in R^3; the first three are collinear."""
    return np.array(
        [[0, 0, 2], [0, 0, 0], [0, 0, -2], [-2, 0, 0], [1, 2, 1], [1, -2, -1]], dtype=float
    )


def hard_example(t=18.0):
    """EDM of :func:`hard_example_config` with entry ``(3, 4)`` replaced by ``t``.

    ``t = 14`` is the exact EDM; ``t = 6/5`` is a second rank-3 EDM.
    """
    D = kappa(gram_from_config(hard_example_config()))
    D[3, 4] = D[4, 3] = t
    return D


# (d, number of points on the flat, dimension of the flat) for n = 100.
HARD_SUITE = [
    (2, 79, 1),
    (3, 86, 1),
    (4, 82, 3),
    (5, 78, 3),
    (6, 89, 1),
    (7, 91, 1),
    (8, 78, 2),
    (9, 76, 8),
    (10, 83, 5),
]
