# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled elementwise kernels: activations, alpha dropout, sign steps and
L-infinity projection. Inputs are 2-D float64 arrays; per-feature vectors are
1-D float64 of length equal to the column count."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, expm1

cnp.import_array()

SELU_LAMBDA = 1.0507009873554805
SELU_ALPHA = 1.6732632423543772

cdef double LAM = 1.0507009873554805
cdef double ALP = 1.6732632423543772

RELU = 0
SELU = 1


def act_forward(const double[:, ::1] z, int kind):
    cdef Py_ssize_t n = z.shape[0], m = z.shape[1], i, j
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef double v
    with nogil:
        for i in range(n):
            for j in range(m):
                v = z[i, j]
                if v > 0.0:
                    o[i, j] = v if kind == 0 else LAM * v
                else:
                    o[i, j] = 0.0 if kind == 0 else LAM * ALP * expm1(v)
    return out


def act_backward(const double[:, ::1] z, const double[:, ::1] up, int kind):
    cdef Py_ssize_t n = z.shape[0], m = z.shape[1], i, j
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef double v
    with nogil:
        for i in range(n):
            for j in range(m):
                v = z[i, j]
                if kind == 0:
                    o[i, j] = up[i, j] if v > 0.0 else 0.0
                elif v > 0.0:
                    o[i, j] = up[i, j] * LAM
                else:
                    o[i, j] = up[i, j] * (LAM * ALP * exp(v))
    return out


def alpha_dropout(const double[:, ::1] h, keep, double a, double b, double alpha_p):
    cdef const cnp.npy_bool[:, ::1] k = np.ascontiguousarray(keep, dtype=np.bool_)
    cdef Py_ssize_t n = h.shape[0], m = h.shape[1], i, j
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(n):
            for j in range(m):
                o[i, j] = a * (h[i, j] if k[i, j] else alpha_p) + b
    return out


def signed_step(const double[:, ::1] x, const double[:, ::1] g, const double[::1] step):
    cdef Py_ssize_t n = x.shape[0], m = x.shape[1], i, j
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef double s
    with nogil:
        for i in range(n):
            for j in range(m):
                s = g[i, j]
                if s > 0.0:
                    o[i, j] = x[i, j] + step[j] * 1.0
                elif s < 0.0:
                    o[i, j] = x[i, j] + step[j] * -1.0
                else:
                    o[i, j] = x[i, j] + step[j] * 0.0
    return out


def project_linf(const double[:, ::1] cand, const double[:, ::1] origin,
                 const double[::1] eps, const double[::1] lo, const double[::1] hi):
    cdef Py_ssize_t n = cand.shape[0], m = cand.shape[1], i, j
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef double lower, upper, v
    with nogil:
        for i in range(n):
            for j in range(m):
                lower = origin[i, j] - eps[j]
                if lo[j] > lower:
                    lower = lo[j]
                upper = origin[i, j] + eps[j]
                if hi[j] < upper:
                    upper = hi[j]
                v = cand[i, j]
                if v < lower:
                    v = lower
                if v > upper:
                    v = upper
                o[i, j] = v
    return out
