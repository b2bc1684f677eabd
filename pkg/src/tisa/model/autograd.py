"""Reverse-mode differentiation over float64 arrays.

Each ``Node`` keeps its value, the nodes it was computed from and a closure
that pushes its gradient back to them. ``backward`` visits nodes in reverse
topological order. Only the handful of operations the toy transformer needs
are provided; products go through the deterministic core kernels.
"""

import math

import numpy as np

from .. import backend, core
from ..attention import KernelParams, kernel_vjp, materialize_fp
from ..errors import ShapeError
from ..toeplitz import profile_offsets


class Node:
    __slots__ = ("value", "grad", "parents", "_backward", "requires_grad")

    def __init__(self, value, parents=(), backward=None, requires_grad=None):
        self.value = value
        self.grad = None
        self.parents = parents
        self._backward = backward
        if requires_grad is None:
            requires_grad = any(p.requires_grad for p in parents)
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.value.shape

    def accumulate(self, g):
        if not self.requires_grad:
            return
        self.grad = g.copy() if self.grad is None else self.grad + g


def leaf(value, requires_grad=True):
    return Node(np.asarray(value, dtype=np.float64), requires_grad=requires_grad)


def constant(value):
    return leaf(value, requires_grad=False)


def backward(root):
    order, seen = [], set()

    def visit(node):
        stack = [(node, False)]
        while stack:
            cur, done = stack.pop()
            if done:
                order.append(cur)
                continue
            if id(cur) in seen:
                continue
            seen.add(id(cur))
            stack.append((cur, True))
            for p in cur.parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))

    visit(root)
    root.grad = np.ones_like(root.value)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def _t(x):
    return np.ascontiguousarray(np.swapaxes(x, -1, -2))


def linear(x, w):
    """(..., d_in) @ (d_in, d_out), flattening leading axes."""
    lead = x.shape[:-1]
    x2 = x.value.reshape(-1, x.shape[-1])
    out = core.matmul(x2, w.value).reshape(*lead, w.shape[1])

    def back(g):
        g2 = g.reshape(-1, w.shape[1])
        x.accumulate(core.matmul(g2, _t(w.value)).reshape(x.shape))
        w.accumulate(core.matmul(_t(x2), g2))

    return Node(out, (x, w), back)


def add(x, y):
    if x.shape != y.shape:
        raise ShapeError(f"add: {x.shape} vs {y.shape}")

    def back(g):
        x.accumulate(g)
        y.accumulate(g)

    return Node(x.value + y.value, (x, y), back)


def add_row(x, b):
    """Add a (1, m) row to every (..., m) slice of ``x``."""
    if b.shape != (1, x.shape[-1]):
        raise ShapeError(f"add_row: row {b.shape} for input {x.shape}")

    def back(g):
        x.accumulate(g)
        b.accumulate(g.reshape(-1, g.shape[-1]).sum(axis=0, keepdims=True))

    return Node(x.value + b.value.reshape(-1), (x, b), back)


def add_table_prefix(x, table):
    """Add rows ``table[:n]`` to every (n, d) sequence of a (B, n, d) batch."""
    n = x.shape[1]

    def back(g):
        x.accumulate(g)
        full = np.zeros_like(table.value)
        full[:n] = g.sum(axis=0)
        table.accumulate(full)

    return Node(x.value + table.value[None, :n], (x, table), back)


def add_square(scores, fp):
    """Add one (n, n) matrix to every slice of a (B, n, n) stack."""

    def back(g):
        scores.accumulate(g)
        fp.accumulate(g.sum(axis=0))

    return Node(scores.value + fp.value[None], (scores, fp), back)


def scale(x, c):
    return Node(x.value * c, (x,), lambda g: x.accumulate(g * c))


def embed(table, ids):
    ids = np.asarray(ids, dtype=np.int64)

    def back(g):
        full = np.zeros_like(table.value)
        np.add.at(full, ids.reshape(-1), g.reshape(-1, table.shape[1]))
        table.accumulate(full)

    return Node(table.value[ids], (table,), back)


def bmm(a, b):
    out = core.bmm(a.value, b.value)

    def back(g):
        a.accumulate(core.bmm(g, _t(b.value)))
        b.accumulate(core.bmm(_t(a.value), g))

    return Node(out, (a, b), back)


def transpose(x):
    return Node(_t(x.value), (x,), lambda g: x.accumulate(_t(g)))


def softmax(x):
    y = core.softmax_rows(x.value)

    def back(g):
        x.accumulate(y * (g - np.sum(g * y, axis=-1, keepdims=True)))

    return Node(y, (x,), back)


def layer_norm(x, gain, bias, eps=1e-5):
    mu = np.mean(x.value, axis=-1, keepdims=True)
    xc = x.value - mu
    var = np.mean(xc * xc, axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    g_row, b_row = gain.value.reshape(-1), bias.value.reshape(-1)

    def back(g):
        flat = lambda a: a.reshape(-1, a.shape[-1])
        gain.accumulate(flat(g * xhat).sum(axis=0, keepdims=True))
        bias.accumulate(flat(g).sum(axis=0, keepdims=True))
        gx = g * g_row
        x.accumulate(inv * (gx - np.mean(gx, axis=-1, keepdims=True)
                            - xhat * np.mean(gx * xhat, axis=-1, keepdims=True)))

    return Node(xhat * g_row + b_row, (x, gain, bias), back)


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu(x):
    """tanh-approximated GELU."""
    v = x.value
    inner = _GELU_C * (v + 0.044715 * v ** 3)
    t = np.tanh(inner)

    def back(g):
        d_inner = _GELU_C * (1.0 + 3 * 0.044715 * v * v)
        x.accumulate(g * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * d_inner))

    return Node(0.5 * v * (1.0 + t), (x,), back)


def concat_last(parts):
    widths = np.cumsum([0] + [p.shape[-1] for p in parts])

    def back(g):
        for p, lo, hi in zip(parts, widths[:-1], widths[1:]):
            p.accumulate(np.ascontiguousarray(g[..., lo:hi]))

    return Node(np.concatenate([p.value for p in parts], axis=-1), tuple(parts), back)


def positional_bias(amp, width, center, n):
    """Dense n x n RBF Toeplitz bias from (1, S) parameter rows.

    The gradient of each offset is the sum of the upstream gradient along
    its diagonal; that vector is pulled back through the kernel partials.
    """
    params = KernelParams(amp.value, width.value, center.value)
    ks = profile_offsets(n)
    fp = materialize_fp(params, n)

    def back(g):
        upstream = backend.kernels().diagonal_sums(np.ascontiguousarray(g))
        ga, gb, gc = kernel_vjp(params, ks, upstream)
        amp.accumulate(ga.reshape(1, -1))
        width.accumulate(gb.reshape(1, -1))
        center.accumulate(gc.reshape(1, -1))

    return Node(fp, (amp, width, center), back)


def cross_entropy(logits, targets):
    """Mean negative log-likelihood over positions whose target is >= 0."""
    t = np.asarray(targets, dtype=np.int64)
    valid = t >= 0
    count = int(valid.sum())
    z = logits.value - np.max(logits.value, axis=-1, keepdims=True)
    logp = z - np.log(np.sum(np.exp(z), axis=-1, keepdims=True))
    picked = np.take_along_axis(logp, np.where(valid, t, 0)[..., None], axis=-1)[..., 0]
    loss = -float(np.sum(np.where(valid, picked, 0.0))) / max(count, 1)

    def back(g):
        p = np.exp(logp)
        onehot = np.zeros_like(p)
        np.put_along_axis(onehot, np.where(valid, t, 0)[..., None], 1.0, axis=-1)
        logits.accumulate(g * (p - onehot) * valid[..., None] / max(count, 1))

    return Node(np.asarray(loss), (logits,), back)
