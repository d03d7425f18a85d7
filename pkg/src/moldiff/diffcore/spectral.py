"""Orthonormal DCT-II / inverse on plain numpy vectors.

The differentiable tape versions live in :mod:`moldiff.diffcore.tensor`;
these are the fast paths for code that never needs gradients (blur targets,
generation loops).
"""

from __future__ import annotations

import numpy as np

from .tensor import EmptyInput, dct_matrix


def dct(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise EmptyInput("dct expects a non-empty 1-D vector")
    return dct_matrix(x.size) @ x


def idct(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise EmptyInput("idct expects a non-empty 1-D vector")
    return dct_matrix(x.size).T @ x
