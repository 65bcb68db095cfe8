# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: row-wise spherical interpolation and uint8 SSE."""

from libc.math cimport acos, fabs, sin, sqrt

import numpy as np

cimport numpy as cnp

cnp.import_array()

# Row status codes shared with the pure-python fallback.
OK = 0
ZERO_NORM_U = 1
ZERO_NORM_V = 2
ANTIPODAL = 3

cdef double PI = 3.141592653589793238462643383279502884


def slerp_rows(const double[:, ::1] u, const double[:, ::1] v,
               double alpha, double eps, double[:, ::1] out):
    """Interpolate each row of ``u`` toward the matching row of ``v``.

    Writes into ``out`` and returns ``(status, row)``; a nonzero status
    names the first degenerate row and leaves ``out`` unspecified.
    Rows subtending an angle below ``eps`` fall back to linear
    interpolation; rows within ``eps`` of pi are antipodal.
    """
    cdef Py_ssize_t rows = u.shape[0]
    cdef Py_ssize_t cols = u.shape[1]
    cdef Py_ssize_t r, c
    cdef double su, sv, dot, nu, nv, cosang, theta, s, w0, w1

    for r in range(rows):
        su = 0.0
        sv = 0.0
        dot = 0.0
        for c in range(cols):
            su += u[r, c] * u[r, c]
            sv += v[r, c] * v[r, c]
            dot += u[r, c] * v[r, c]
        if su == 0.0:
            return ZERO_NORM_U, r
        if sv == 0.0:
            return ZERO_NORM_V, r
        nu = sqrt(su)
        nv = sqrt(sv)
        cosang = dot / (nu * nv)
        if cosang > 1.0:
            cosang = 1.0
        elif cosang < -1.0:
            cosang = -1.0
        theta = acos(cosang)
        if theta < eps:
            w0 = 1.0 - alpha
            for c in range(cols):
                out[r, c] = w0 * u[r, c] + alpha * v[r, c]
        elif theta > PI - eps:
            return ANTIPODAL, r
        else:
            s = sin(theta)
            w0 = sin((1.0 - alpha) * theta) / s
            w1 = sin(alpha * theta) / s
            for c in range(cols):
                out[r, c] = w0 * u[r, c] + w1 * v[r, c]
    return OK, -1


def sse_u8(const unsigned char[::1] a, const unsigned char[::1] b):
    """Exact sum of squared differences between two uint8 buffers."""
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t i
    cdef long long acc = 0
    cdef long long d
    for i in range(n):
        d = <long long> a[i] - <long long> b[i]
        acc += d * d
    return acc
