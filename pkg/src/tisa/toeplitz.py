"""Degree of Toeplitzness of a square matrix.

Offsets are ``k = j - i``. A profile over an n x n matrix is a vector of
length ``2n - 1`` whose slot ``k + n - 1`` belongs to offset ``k``.

The Frobenius-optimal Toeplitz approximation is the per-diagonal mean, so
the fit is closed form. R^2 compares its residual with the spread of all
entries around the grand mean.
"""

from dataclasses import dataclass

import numpy as np

from . import backend
from .core import as_matrix, gram
from .errors import ShapeError


def profile_offsets(n):
    return np.arange(-(n - 1), n, dtype=np.int64)


def _square(a):
    a = as_matrix(a)
    if a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ShapeError(f"expected a non-empty square matrix, got {a.shape[0]}x{a.shape[1]}")
    return a


def diagonal_counts(n):
    return (n - np.abs(profile_offsets(n))).astype(np.float64)


def diagonal_profile(a):
    """Mean of every diagonal of a square matrix, ordered by offset."""
    a = _square(a)
    return backend.kernels().diagonal_sums(a) / diagonal_counts(a.shape[0])


def toeplitz_from_profile(profile):
    """Dense n x n matrix with entry (i, j) = profile[j - i + n - 1]."""
    profile = np.asarray(profile, dtype=np.float64)
    n = (profile.shape[0] + 1) // 2
    if profile.ndim != 1 or profile.shape[0] != 2 * n - 1:
        raise ShapeError(f"a profile must have odd length 2n-1, got {profile.shape}")
    idx = np.arange(n)
    return np.ascontiguousarray(profile[idx[None, :] - idx[:, None] + n - 1])


@dataclass(frozen=True)
class ToeplitzFit:
    profile: np.ndarray
    fitted: np.ndarray
    rss: float
    tss: float
    r2: float

    @property
    def offsets(self):
        return profile_offsets(self.fitted.shape[0])


# Relative to n^2: below this the matrix is treated as constant.
DEGENERATE_TSS = 1e-12


def toeplitzness(a):
    """Best-fit Toeplitz matrix and the R^2 it explains."""
    a = _square(a)
    n = a.shape[0]
    profile = diagonal_profile(a)
    fitted = toeplitz_from_profile(profile)
    rss = float(np.sum((a - fitted) ** 2))
    tss = float(np.sum((a - np.mean(a)) ** 2))
    if tss <= DEGENERATE_TSS * n * n:
        r2 = 1.0
    else:
        # rss <= tss analytically; clip rounding noise.
        r2 = min(1.0, max(0.0, 1.0 - rss / tss))
    return ToeplitzFit(profile=profile, fitted=fitted, rss=rss, tss=tss, r2=r2)


def embedding_toeplitzness(e_p, cosine=False):
    """R^2 of the position-embedding Gram matrix (or its cosine variant)."""
    return toeplitzness(gram(e_p, cosine=cosine))
