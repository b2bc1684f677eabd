"""Translation-invariant positional scoring and the attention forms using it.

A scoring function is a sum of radial basis functions of the relative
offset ``k = j - i``::

    f(k) = sum_s amp[s] * exp(-|width[s]| * (k - center[s])**2)

It defines an n x n Toeplitz bias ``F[i, j] = f(j - i)`` for any n, so the
same parameters serve every sequence length. Widths are stored raw and the
absolute value is taken on evaluation.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import backend
from .core import as_matrix, matmul, softmax_rows
from .errors import DomainError, ShapeError
from .toeplitz import profile_offsets, toeplitz_from_profile


@dataclass
class KernelParams:
    amp: np.ndarray
    width: np.ndarray
    center: np.ndarray
    layer: int = 0
    head: int = 0

    def __post_init__(self):
        self.amp = np.ascontiguousarray(self.amp, dtype=np.float64).reshape(-1)
        self.width = np.ascontiguousarray(self.width, dtype=np.float64).reshape(-1)
        self.center = np.ascontiguousarray(self.center, dtype=np.float64).reshape(-1)
        if not (self.amp.shape == self.width.shape == self.center.shape):
            raise ShapeError("amp, width and center must have the same length")

    @classmethod
    def from_triples(cls, triples, layer=0, head=0):
        arr = np.asarray(list(triples), dtype=np.float64).reshape(-1, 3)
        return cls(arr[:, 0], arr[:, 1], arr[:, 2], layer, head)

    @classmethod
    def empty(cls, layer=0, head=0):
        return cls(np.zeros(0), np.zeros(0), np.zeros(0), layer, head)

    @property
    def S(self):
        return self.amp.shape[0]

    def triples(self):
        return list(zip(self.amp.tolist(), self.width.tolist(), self.center.tolist()))

    def flat(self):
        """Parameters packed as ``[amp..., width..., center...]``."""
        return np.concatenate([self.amp, self.width, self.center])

    def with_flat(self, theta):
        S = self.S
        return KernelParams(theta[:S], theta[S:2 * S], theta[2 * S:], self.layer, self.head)

    def copy(self):
        return KernelParams(self.amp.copy(), self.width.copy(), self.center.copy(), self.layer, self.head)


def _offsets(ks):
    return np.ascontiguousarray(np.atleast_1d(np.asarray(ks, dtype=np.float64)))


def eval_profile(params, ks):
    """f evaluated at every offset in ``ks``."""
    return backend.kernels().rbf_profile(params.amp, params.width, params.center, _offsets(ks))


def eval_kernel(params, k):
    return float(eval_profile(params, [k])[0])


def materialize_profile(params, n):
    """f over offsets ``-(n-1) .. n-1``: the O(n) generator of the n x n bias."""
    if n < 1:
        raise DomainError(f"sequence length must be >= 1, got {n}")
    return eval_profile(params, profile_offsets(n))


def materialize_fp(params, n):
    return toeplitz_from_profile(materialize_profile(params, n))


def kernel_vjp(params, ks, upstream):
    """Gradients (d_amp, d_width, d_center) of ``sum_t upstream[t] * f(ks[t])``.

    At ``width == 0`` the subgradient of ``|width|`` is taken as 0.
    """
    upstream = _offsets(upstream)
    ks = _offsets(ks)
    if upstream.shape != ks.shape:
        raise ShapeError(f"{ks.shape[0]} offsets but {upstream.shape[0]} upstream values")
    return backend.kernels().rbf_vjp(params.amp, params.width, params.center, ks, upstream)


def kernel_gradients(params, k, upstream=1.0):
    return kernel_vjp(params, [k], [upstream])


def _check_qkv(q, k, v, fp):
    q, k, v = as_matrix(q, "q"), as_matrix(k, "k"), as_matrix(v, "v")
    n = q.shape[0]
    if q.shape[1] != k.shape[1]:
        raise ShapeError(f"query width {q.shape[1]} != key width {k.shape[1]}")
    if k.shape[0] != n or v.shape[0] != n:
        raise ShapeError(f"q, k, v need equal row counts, got {n}, {k.shape[0]}, {v.shape[0]}")
    if fp is not None:
        fp = as_matrix(fp, "positional scores")
        if fp.shape != (n, n):
            raise ShapeError(f"positional scores must be {n}x{n}, got {fp.shape[0]}x{fp.shape[1]}")
    return q, k, v, fp


def attention(q, k, v, fp=None, mask=None):
    """``softmax(q k^T / sqrt(d_k) + fp + mask) v``; ``fp`` and ``mask`` optional."""
    q, k, v, fp = _check_qkv(q, k, v, fp)
    scores = matmul(q, np.ascontiguousarray(k.T)) / math.sqrt(q.shape[1])
    if fp is not None:
        scores = scores + fp
    if mask is not None:
        scores = scores + np.asarray(mask, dtype=np.float64)
    return matmul(softmax_rows(scores), v)


def attention_case_a(q, k, v, fp, mask=None):
    """Positional bias added on top of attention whose q, k may carry position embeddings."""
    return attention(q, k, v, fp, mask)


def attention_case_b(qw, kw, vw, fp, mask=None):
    """Positional bias as the only positional signal; inputs come from word embeddings alone."""
    return attention(qw, kw, vw, fp, mask)


@dataclass
class TisaStack:
    """One scoring function per (layer, head)."""

    H: int
    L: int
    d_k: int | None = None
    kernels: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.kernels[key]

    def __setitem__(self, key, params):
        layer, head = key
        if not (0 <= layer < self.L and 0 <= head < self.H):
            raise IndexError(f"(layer, head) = {key} outside L={self.L}, H={self.H}")
        params.layer, params.head = layer, head
        self.kernels[key] = params

    @property
    def S(self):
        sizes = {p.S for p in self.kernels.values()}
        return sizes.pop() if len(sizes) == 1 else None

    def param_count(self):
        return sum(3 * p.S for p in self.kernels.values())

    def to_json(self):
        rows = []
        for (layer, head) in sorted(self.kernels):
            for s, (a, b, c) in enumerate(self.kernels[layer, head].triples()):
                rows.append({"layer": layer, "head": head, "s": s, "a": a, "b": b, "c": c})
        # json writes floats with repr(), which round-trips exactly.
        doc = {"S": self.S, "H": self.H, "L": self.L, "d_k": self.d_k, "kernels": rows}
        return json.dumps(doc, indent=2) + "\n"

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        stack = cls(H=int(doc["H"]), L=int(doc["L"]), d_k=doc.get("d_k"))
        grouped = {}
        for row in doc["kernels"]:
            grouped.setdefault((int(row["layer"]), int(row["head"])), []).append(row)
        for key, rows in grouped.items():
            rows.sort(key=lambda r: int(r["s"]))
            stack[key] = KernelParams.from_triples(
                [(float(r["a"]), float(r["b"]), float(r["c"])) for r in rows])
        return stack

    def save(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())
