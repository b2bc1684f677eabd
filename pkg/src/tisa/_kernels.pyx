# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops.

Every routine here has a numpy twin in ``_kernels_py`` with the same
reduction order. Build with ``-ffp-contract=off`` so products and sums are
rounded separately, which keeps ``matmul``/``bmm``/``diagonal_sums``
bitwise identical across the two backends.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, fabs

cnp.import_array()


def matmul(const double[:, ::1] a, const double[:, ::1] b):
    cdef Py_ssize_t m = a.shape[0], inner = a.shape[1], n = b.shape[1]
    cdef Py_ssize_t i, j, p
    cdef double aip
    out = np.zeros((m, n), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(m):
            for p in range(inner):
                aip = a[i, p]
                for j in range(n):
                    o[i, j] = o[i, j] + aip * b[p, j]
    return out


def bmm(const double[:, :, ::1] a, const double[:, :, ::1] b):
    cdef Py_ssize_t nb = a.shape[0], m = a.shape[1], inner = a.shape[2]
    cdef Py_ssize_t n = b.shape[2]
    cdef Py_ssize_t t, i, j, p
    cdef double aip
    out = np.zeros((nb, m, n), dtype=np.float64)
    cdef double[:, :, ::1] o = out
    with nogil:
        for t in range(nb):
            for i in range(m):
                for p in range(inner):
                    aip = a[t, i, p]
                    for j in range(n):
                        o[t, i, j] = o[t, i, j] + aip * b[t, p, j]
    return out


def diagonal_sums(const double[:, ::1] a):
    """Sum of each diagonal; slot ``k + n - 1`` holds offset ``k = j - i``."""
    cdef Py_ssize_t n = a.shape[0], i, j
    out = np.zeros(2 * n - 1, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            for j in range(n):
                o[j - i + n - 1] = o[j - i + n - 1] + a[i, j]
    return out


def rbf_profile(const double[::1] amp, const double[::1] width,
                const double[::1] center, const double[::1] ks):
    cdef Py_ssize_t m = ks.shape[0], S = amp.shape[0], t, s
    cdef double acc, d
    out = np.empty(m, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for t in range(m):
            acc = 0.0
            for s in range(S):
                d = ks[t] - center[s]
                acc = acc + amp[s] * exp(-fabs(width[s]) * (d * d))
            o[t] = acc
    return out


cdef inline double _sign(double x) nogil:
    return (x > 0) - (x < 0)


def rbf_vjp(const double[::1] amp, const double[::1] width,
            const double[::1] center, const double[::1] ks,
            const double[::1] upstream):
    """Return (d_amp, d_width, d_center) = sum_t upstream[t] * df(ks[t])/dtheta."""
    cdef Py_ssize_t m = ks.shape[0], S = amp.shape[0], t, s
    cdef double d, e, u, bw, sg
    ga = np.zeros(S, dtype=np.float64)
    gb = np.zeros(S, dtype=np.float64)
    gc = np.zeros(S, dtype=np.float64)
    cdef double[::1] da = ga, db = gb, dc = gc
    with nogil:
        for s in range(S):
            bw = fabs(width[s])
            sg = _sign(width[s])
            for t in range(m):
                u = upstream[t]
                d = ks[t] - center[s]
                e = exp(-bw * (d * d))
                da[s] = da[s] + u * e
                db[s] = db[s] + u * (-sg * (d * d) * amp[s] * e)
                dc[s] = dc[s] + u * (2.0 * bw * d * amp[s] * e)
    return ga, gb, gc


def rbf_fit_terms(const double[::1] amp, const double[::1] width,
                  const double[::1] center, const double[::1] ks,
                  const double[::1] target):
    """Residual sum of squares, its gradient and the Gauss-Newton diagonal.

    Gradient and diagonal are packed as ``[amp..., width..., center...]``.
    """
    cdef Py_ssize_t m = ks.shape[0], S = amp.shape[0], t, s
    cdef double d, e, r, bw, sg, rss = 0.0, ja, jb, jc
    resid = np.empty(m, dtype=np.float64)
    cdef double[::1] res = resid
    grad = np.zeros(3 * S, dtype=np.float64)
    diag = np.zeros(3 * S, dtype=np.float64)
    cdef double[::1] g = grad, h = diag
    with nogil:
        for t in range(m):
            r = 0.0
            for s in range(S):
                d = ks[t] - center[s]
                r = r + amp[s] * exp(-fabs(width[s]) * (d * d))
            r = r - target[t]
            res[t] = r
            rss = rss + r * r
        for s in range(S):
            bw = fabs(width[s])
            sg = _sign(width[s])
            for t in range(m):
                d = ks[t] - center[s]
                e = exp(-bw * (d * d))
                ja = e
                jb = -sg * (d * d) * amp[s] * e
                jc = 2.0 * bw * d * amp[s] * e
                r = res[t]
                g[s] = g[s] + 2.0 * r * ja
                g[S + s] = g[S + s] + 2.0 * r * jb
                g[2 * S + s] = g[2 * S + s] + 2.0 * r * jc
                h[s] = h[s] + ja * ja
                h[S + s] = h[S + s] + jb * jb
                h[2 * S + s] = h[2 * S + s] + jc * jc
    return rss, grad, diag
