# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled row-wise kernels: single-pass fused versions of the numpy lane.

Same signatures as ``_kernels_py``; float32 in, float32 out. Row reductions
accumulate in double for stability. Single-threaded on purpose: reruns must
be bit-identical.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport expf, logf, sqrt

LANE = "compiled"


def softmax_fwd(cnp.float32_t[:, ::1] x):
    cdef Py_ssize_t rows = x.shape[0], cols = x.shape[1], r, c
    out = np.empty((rows, cols), dtype=np.float32)
    cdef cnp.float32_t[:, ::1] y = out
    cdef float m, v
    cdef double s
    for r in range(rows):
        m = x[r, 0]
        for c in range(1, cols):
            if x[r, c] > m:
                m = x[r, c]
        s = 0.0
        for c in range(cols):
            v = expf(x[r, c] - m)
            y[r, c] = v
            s += v
        for c in range(cols):
            y[r, c] = <float> (y[r, c] / s)
    return out


def softmax_bwd(cnp.float32_t[:, ::1] y, cnp.float32_t[:, ::1] gout):
    cdef Py_ssize_t rows = y.shape[0], cols = y.shape[1], r, c
    out = np.empty((rows, cols), dtype=np.float32)
    cdef cnp.float32_t[:, ::1] gx = out
    cdef double inner
    for r in range(rows):
        inner = 0.0
        for c in range(cols):
            inner += gout[r, c] * y[r, c]
        for c in range(cols):
            gx[r, c] = <float> (y[r, c] * (gout[r, c] - inner))
    return out


def log_softmax_fwd(cnp.float32_t[:, ::1] x):
    cdef Py_ssize_t rows = x.shape[0], cols = x.shape[1], r, c
    out = np.empty((rows, cols), dtype=np.float32)
    cdef cnp.float32_t[:, ::1] y = out
    cdef float m
    cdef double s, lse
    for r in range(rows):
        m = x[r, 0]
        for c in range(1, cols):
            if x[r, c] > m:
                m = x[r, c]
        s = 0.0
        for c in range(cols):
            s += expf(x[r, c] - m)
        lse = logf(<float> s)
        for c in range(cols):
            y[r, c] = <float> (x[r, c] - m - lse)
    return out


def log_softmax_bwd(cnp.float32_t[:, ::1] y, cnp.float32_t[:, ::1] gout):
    cdef Py_ssize_t rows = y.shape[0], cols = y.shape[1], r, c
    out = np.empty((rows, cols), dtype=np.float32)
    cdef cnp.float32_t[:, ::1] gx = out
    cdef double total
    for r in range(rows):
        total = 0.0
        for c in range(cols):
            total += gout[r, c]
        for c in range(cols):
            gx[r, c] = <float> (gout[r, c] - expf(y[r, c]) * total)
    return out


def rmsnorm_fwd(cnp.float32_t[:, ::1] x, cnp.float32_t[::1] gain, float eps):
    cdef Py_ssize_t rows = x.shape[0], cols = x.shape[1], r, c
    out = np.empty((rows, cols), dtype=np.float32)
    inv_out = np.empty(rows, dtype=np.float32)
    cdef cnp.float32_t[:, ::1] y = out
    cdef cnp.float32_t[::1] inv = inv_out
    cdef double ms
    cdef float ir
    for r in range(rows):
        ms = 0.0
        for c in range(cols):
            ms += <double> x[r, c] * x[r, c]
        ir = <float> (1.0 / sqrt(ms / cols + eps))
        inv[r] = ir
        for c in range(cols):
            y[r, c] = x[r, c] * ir * gain[c]
    return out, inv_out


def rmsnorm_bwd(
    cnp.float32_t[:, ::1] x,
    cnp.float32_t[::1] gain,
    cnp.float32_t[::1] inv_rms,
    cnp.float32_t[:, ::1] gout,
):
    cdef Py_ssize_t rows = x.shape[0], cols = x.shape[1], r, c
    gx_out = np.empty((rows, cols), dtype=np.float32)
    ggain_out = np.zeros(cols, dtype=np.float64)
    cdef cnp.float32_t[:, ::1] gx = gx_out
    cdef cnp.float64_t[::1] ggain = ggain_out
    cdef double inner, scale
    cdef float r1, r3
    for r in range(rows):
        r1 = inv_rms[r]
        r3 = r1 * r1 * r1
        inner = 0.0
        for c in range(cols):
            inner += <double> gout[r, c] * gain[c] * x[r, c]
        scale = inner / cols
        for c in range(cols):
            gx[r, c] = <float> (r1 * gout[r, c] * gain[c] - x[r, c] * r3 * scale)
            ggain[c] += <double> gout[r, c] * x[r, c] * r1
    return gx_out, ggain_out.astype(np.float32)


def silu_fwd(x):
    flat = np.ascontiguousarray(x, dtype=np.float32).reshape(-1)
    out = np.empty_like(flat)
    _silu_fwd_flat(flat, out)
    return out.reshape(x.shape)


cdef void _silu_fwd_flat(cnp.float32_t[::1] x, cnp.float32_t[::1] y):
    cdef Py_ssize_t i, n = x.shape[0]
    cdef float s
    for i in range(n):
        s = 1.0 / (1.0 + expf(-x[i]))
        y[i] = x[i] * s


def silu_bwd(x, gout):
    flat_x = np.ascontiguousarray(x, dtype=np.float32).reshape(-1)
    flat_g = np.ascontiguousarray(gout, dtype=np.float32).reshape(-1)
    out = np.empty_like(flat_x)
    _silu_bwd_flat(flat_x, flat_g, out)
    return out.reshape(x.shape)


cdef void _silu_bwd_flat(
    cnp.float32_t[::1] x, cnp.float32_t[::1] gout, cnp.float32_t[::1] gx
):
    cdef Py_ssize_t i, n = x.shape[0]
    cdef float s
    for i in range(n):
        s = 1.0 / (1.0 + expf(-x[i]))
        gx[i] = gout[i] * (s * (1.0 + x[i] * (1.0 - s)))


def sigmoid_fwd(x):
    flat = np.ascontiguousarray(x, dtype=np.float32).reshape(-1)
    out = np.empty_like(flat)
    _sigmoid_fwd_flat(flat, out)
    return out.reshape(x.shape)


cdef void _sigmoid_fwd_flat(cnp.float32_t[::1] x, cnp.float32_t[::1] y):
    cdef Py_ssize_t i, n = x.shape[0]
    for i in range(n):
        y[i] = 1.0 / (1.0 + expf(-x[i]))


def sigmoid_bwd(y, gout):
    flat_y = np.ascontiguousarray(y, dtype=np.float32).reshape(-1)
    flat_g = np.ascontiguousarray(gout, dtype=np.float32).reshape(-1)
    out = np.empty_like(flat_y)
    _sigmoid_bwd_flat(flat_y, flat_g, out)
    return out.reshape(y.shape)


cdef void _sigmoid_bwd_flat(
    cnp.float32_t[::1] y, cnp.float32_t[::1] gout, cnp.float32_t[::1] gx
):
    cdef Py_ssize_t i, n = y.shape[0]
    for i in range(n):
        gx[i] = gout[i] * y[i] * (1.0 - y[i])


def unit_normalize_fwd(cnp.float32_t[:, ::1] x):
    cdef Py_ssize_t rows = x.shape[0], cols = x.shape[1], r, c
    out = np.empty((rows, cols), dtype=np.float32)
    inv_out = np.empty(rows, dtype=np.float32)
    cdef cnp.float32_t[:, ::1] y = out
    cdef cnp.float32_t[::1] inv = inv_out
    cdef double ss
    cdef float ir
    for r in range(rows):
        ss = 0.0
        for c in range(cols):
            ss += <double> x[r, c] * x[r, c]
        ir = <float> (1.0 / sqrt(ss))
        inv[r] = ir
        for c in range(cols):
            y[r, c] = x[r, c] * ir
    return out, inv_out


def unit_normalize_bwd(
    cnp.float32_t[:, ::1] y, cnp.float32_t[::1] inv_norm, cnp.float32_t[:, ::1] gout
):
    cdef Py_ssize_t rows = y.shape[0], cols = y.shape[1], r, c
    out = np.empty((rows, cols), dtype=np.float32)
    cdef cnp.float32_t[:, ::1] gx = out
    cdef double inner
    for r in range(rows):
        inner = 0.0
        for c in range(cols):
            inner += <double> gout[r, c] * y[r, c]
        for c in range(cols):
            gx[r, c] = <float> (inv_norm[r] * (gout[r, c] - y[r, c] * inner))
    return out
