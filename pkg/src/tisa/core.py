"""Dense float64 primitives.

Matrices are plain 2-D ``numpy.ndarray`` objects of dtype float64. Nothing
here broadcasts: operands must already have compatible shapes. Products go
through the active kernel backend, which sums over the inner index strictly
left to right so results are bit-reproducible.
"""

import numpy as np

from . import backend
from .errors import ShapeError


def as_matrix(x, name="matrix"):
    """Return ``x`` as a C-contiguous 2-D float64 array, or raise ShapeError."""
    m = np.ascontiguousarray(x, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {m.shape}")
    return m


def matmul(a, b):
    a = as_matrix(a, "left operand")
    b = as_matrix(b, "right operand")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}")
    return backend.kernels().matmul(a, b)


def bmm(a, b):
    """Batched product of (B, m, p) and (B, p, n) stacks."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if a.ndim != 3 or b.ndim != 3 or a.shape[0] != b.shape[0] or a.shape[2] != b.shape[1]:
        raise ShapeError(f"cannot batch-multiply {a.shape} by {b.shape}")
    return backend.kernels().bmm(a, b)


def softmax_rows(scores):
    """Row-wise softmax, stabilised by subtracting each row's maximum.

    Works on any array whose last axis is the row; ``-inf`` entries act as a
    mask as long as every row keeps at least one finite entry.
    """
    s = np.asarray(scores, dtype=np.float64)
    z = np.exp(s - np.max(s, axis=-1, keepdims=True))
    return z / np.sum(z, axis=-1, keepdims=True)


def normalize_rows(e):
    e = as_matrix(e)
    norms = np.sqrt(np.sum(e * e, axis=1, keepdims=True))
    return e / np.where(norms > 0.0, norms, 1.0)


def gram(e, cosine=False):
    """``e @ e.T``, exactly symmetric.

    With ``cosine=True`` rows are scaled to unit length first, giving the
    cosine-similarity matrix (zero rows stay zero).
    """
    e = normalize_rows(e) if cosine else as_matrix(e)
    g = matmul(e, np.ascontiguousarray(e.T))
    lower = np.tril_indices(g.shape[0], -1)
    g[lower] = g.T[lower]
    return g
