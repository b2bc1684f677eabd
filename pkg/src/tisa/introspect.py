"""Positional-score extraction from position/word embeddings and projections.

Replacing every word embedding with the vocabulary average removes content
from ``(E_W + E_P) W_Q W_K^T (E_W + E_P)^T / sqrt(d_k)``; what remains is the
average positional contribution to attention scores. All three terms that
involve ``E_P`` are kept.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import as_matrix, matmul
from .errors import DomainError, ShapeError


@dataclass
class EmbeddingBundle:
    e_p: np.ndarray
    e_w: np.ndarray
    # (layer, head) -> (w_q, w_k). Shared projections may reuse the same arrays.
    projections: dict = field(default_factory=dict)
    H: int = 1
    L: int = 1

    def __post_init__(self):
        self.e_p = as_matrix(self.e_p, "e_p")
        self.e_w = as_matrix(self.e_w, "e_w")
        if self.e_p.shape[1] != self.e_w.shape[1]:
            raise ShapeError(f"e_p width {self.e_p.shape[1]} != e_w width {self.e_w.shape[1]}")
        if not self.projections:
            raise DomainError("a bundle needs at least one (layer, head) projection pair")
        d_k = None
        for key, (w_q, w_k) in self.projections.items():
            layer, head = key
            if not (0 <= layer < self.L and 0 <= head < self.H):
                raise ShapeError(f"projection {key} outside L={self.L}, H={self.H}")
            w_q, w_k = as_matrix(w_q, "w_q"), as_matrix(w_k, "w_k")
            if w_q.shape != w_k.shape or w_q.shape[0] != self.d:
                raise ShapeError(f"projection {key}: w_q {w_q.shape}, w_k {w_k.shape}, d={self.d}")
            if d_k is not None and w_q.shape[1] != d_k:
                raise ShapeError(f"projection {key} has d_k={w_q.shape[1]}, expected {d_k}")
            d_k = w_q.shape[1]
            self.projections[key] = (w_q, w_k)

    @property
    def n(self):
        return self.e_p.shape[0]

    @property
    def d(self):
        return self.e_p.shape[1]

    @property
    def d_k(self):
        return next(iter(self.projections.values()))[0].shape[1]


def average_word_embedding(e_w):
    e_w = as_matrix(e_w, "e_w")
    if e_w.shape[0] < 1:
        raise DomainError("the vocabulary is empty")
    return np.mean(e_w, axis=0)


def extract_positional_scores(bundle, layer, head):
    """n x n average positional score matrix for one attention head."""
    try:
        w_q, w_k = bundle.projections[layer, head]
    except KeyError:
        raise LookupError(f"bundle has no projections for layer {layer}, head {head}") from None
    e_avg = np.ascontiguousarray(np.tile(average_word_embedding(bundle.e_w), (bundle.n, 1)))
    qp, kp = matmul(bundle.e_p, w_q), matmul(bundle.e_p, w_k)
    qw, kw = matmul(e_avg, w_q), matmul(e_avg, w_k)
    kp_t, kw_t = np.ascontiguousarray(kp.T), np.ascontiguousarray(kw.T)
    total = matmul(qw, kp_t) + matmul(qp, kw_t) + matmul(qp, kp_t)
    return total / math.sqrt(w_q.shape[1])


def extract_all(bundle, jobs=1, keys=None):
    """Scores for every (or each listed) projection pair, ordered by (layer, head)."""
    keys = sorted(bundle.projections if keys is None else keys)
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        results = list(pool.map(lambda key: extract_positional_scores(bundle, *key), keys))
    return dict(zip(keys, results))


def neutralize_position_embeddings(e_p):
    """Replace every position embedding with the average one.

    Already-uniform input comes back as an exact copy, since re-averaging
    equal floats can move the last bit.
    """
    e_p = as_matrix(e_p, "e_p")
    if np.all(e_p == e_p[0]):
        return e_p.copy()
    return np.tile(np.mean(e_p, axis=0), (e_p.shape[0], 1))


@dataclass(frozen=True)
class Section:
    row: int
    offsets: np.ndarray
    values: np.ndarray
    clipped: bool


def aligned_sections(f, rows, half_width, clip=False):
    """Slices ``f[i, i-w .. i+w]`` for each requested row, indexed by offset.

    A window that leaves the matrix raises DomainError unless ``clip`` is set,
    in which case it is truncated and marked ``clipped``.
    """
    f = as_matrix(f)
    n_rows, n_cols = f.shape
    if half_width < 0:
        raise DomainError(f"half_width must be >= 0, got {half_width}")
    out = []
    for i in rows:
        if not 0 <= i < n_rows:
            raise IndexError(f"row {i} outside 0..{n_rows - 1}")
        lo, hi = i - half_width, i + half_width
        clipped = lo < 0 or hi >= n_cols
        if clipped and not clip:
            raise DomainError(f"window of half-width {half_width} around row {i} leaves the matrix")
        lo, hi = max(lo, 0), min(hi, n_cols - 1)
        out.append(Section(i, np.arange(lo - i, hi - i + 1), f[i, lo:hi + 1].copy(), clipped))
    return out
