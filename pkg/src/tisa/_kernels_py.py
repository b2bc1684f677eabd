"""Pure-numpy twins of the compiled kernels in ``_kernels.pyx``.

The loops over the reduction index are kept explicit so that ``matmul``,
``bmm`` and ``diagonal_sums`` accumulate in the same order as the compiled
code and give bitwise-identical results. The RBF routines vectorise over
offsets and agree with the compiled versions to a few ulps (``exp`` comes
from different libraries).
"""

import numpy as np


def matmul(a, b):
    out = np.zeros((a.shape[0], b.shape[1]), dtype=np.float64)
    for p in range(a.shape[1]):
        out += a[:, p, None] * b[None, p, :]
    return out


def bmm(a, b):
    out = np.zeros((a.shape[0], a.shape[1], b.shape[2]), dtype=np.float64)
    for p in range(a.shape[2]):
        out += a[:, :, p, None] * b[:, None, p, :]
    return out


def diagonal_sums(a):
    n = a.shape[0]
    out = np.zeros(2 * n - 1, dtype=np.float64)
    for i in range(n):
        out[n - 1 - i:2 * n - 1 - i] += a[i]
    return out


def rbf_profile(amp, width, center, ks):
    out = np.zeros(ks.shape[0], dtype=np.float64)
    for s in range(amp.shape[0]):
        d = ks - center[s]
        out = out + amp[s] * np.exp(-abs(width[s]) * (d * d))
    return out


def _partials(amp, width, center, ks, s):
    bw = abs(width[s])
    d = ks - center[s]
    e = np.exp(-bw * (d * d))
    return e, -np.sign(width[s]) * (d * d) * amp[s] * e, 2.0 * bw * d * amp[s] * e


def rbf_vjp(amp, width, center, ks, upstream):
    S = amp.shape[0]
    ga, gb, gc = np.zeros(S), np.zeros(S), np.zeros(S)
    for s in range(S):
        ja, jb, jc = _partials(amp, width, center, ks, s)
        ga[s] = np.sum(upstream * ja)
        gb[s] = np.sum(upstream * jb)
        gc[s] = np.sum(upstream * jc)
    return ga, gb, gc


def rbf_fit_terms(amp, width, center, ks, target):
    S = amp.shape[0]
    resid = rbf_profile(amp, width, center, ks) - target
    grad = np.zeros(3 * S)
    diag = np.zeros(3 * S)
    for s in range(S):
        for slot, j in zip((s, S + s, 2 * S + s), _partials(amp, width, center, ks, s)):
            grad[slot] = 2.0 * np.sum(resid * j)
            diag[slot] = np.sum(j * j)
    return float(np.sum(resid * resid)), grad, diag
