# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled batched SE(3) kernels.

Semantics match `etseed._kernels_py` exactly; see that module for the
conventions (twist layout, small-angle Taylor switch, pi-band fallback).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport atan2, cos, sin, sqrt, pi

cnp.import_array()

SMALL_ANGLE = 1e-6
PI_BAND = 1e-6

BACKEND_NAME = "compiled"

cdef double _SMALL = 1e-6
cdef double _PIBAND = 1e-6


cdef inline void _exp_one(const double* u, const double* w,
                          double* R, double* t) noexcept nogil:
    cdef double th2 = w[0] * w[0] + w[1] * w[1] + w[2] * w[2]
    cdef double th = sqrt(th2)
    cdef double a, b, c
    if th < _SMALL:
        a = 1.0 - th2 / 6.0
        b = 0.5 - th2 / 24.0
        c = 1.0 / 6.0 - th2 / 120.0
    else:
        a = sin(th) / th
        b = (1.0 - cos(th)) / th2
        c = (th - sin(th)) / (th2 * th)

    cdef double W[9]
    W[0] = 0.0;    W[1] = -w[2]; W[2] = w[1]
    W[3] = w[2];   W[4] = 0.0;   W[5] = -w[0]
    W[6] = -w[1];  W[7] = w[0];  W[8] = 0.0

    cdef double W2[9]
    cdef int i, j, k
    for i in range(3):
        for j in range(3):
            W2[3 * i + j] = 0.0
            for k in range(3):
                W2[3 * i + j] += W[3 * i + k] * W[3 * k + j]

    cdef double V[9]
    for i in range(3):
        for j in range(3):
            R[3 * i + j] = a * W[3 * i + j] + b * W2[3 * i + j]
            V[3 * i + j] = b * W[3 * i + j] + c * W2[3 * i + j]
        R[4 * i] += 1.0
        V[4 * i] += 1.0

    for i in range(3):
        t[i] = V[3 * i] * u[0] + V[3 * i + 1] * u[1] + V[3 * i + 2] * u[2]


cdef inline void _log_one(const double* R, const double* t,
                          double* out) noexcept nogil:
    cdef double tr = R[0] + R[4] + R[8]
    cdef double cth = (tr - 1.0) * 0.5
    cdef double vee[3]
    vee[0] = 0.5 * (R[7] - R[5])
    vee[1] = 0.5 * (R[2] - R[6])
    vee[2] = 0.5 * (R[3] - R[1])
    cdef double sth = sqrt(vee[0] * vee[0] + vee[1] * vee[1] + vee[2] * vee[2])
    cdef double th = atan2(sth, cth)
    cdef double th2 = th * th
    cdef double scale, axn, denom
    cdef double w[3]
    cdef int j, m, jbest

    if th > pi - _PIBAND:
        jbest = 0
        if R[4] > R[0]:
            jbest = 1
        if R[8] > R[3 * jbest + jbest]:
            jbest = 2
        axn = sqrt(((R[3 * jbest + jbest] + 1.0) * 0.5) if R[3 * jbest + jbest] > -1.0 else 0.0)
        w[jbest] = axn
        denom = 4.0 * axn if axn > 0.0 else 1.0
        for m in range(3):
            if m != jbest:
                w[m] = (R[3 * jbest + m] + R[3 * m + jbest]) / denom
        axn = sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2])
        if axn > 0.0:
            for m in range(3):
                w[m] = th * w[m] / axn
    else:
        # small: w = (1 + th^2/6) vee; regular: w = th * vee / ||vee||
        if th < _SMALL:
            scale = 1.0 + th2 / 6.0
        else:
            scale = th / sth
        w[0] = scale * vee[0]
        w[1] = scale * vee[1]
        w[2] = scale * vee[2]

    cdef double d
    th2 = w[0] * w[0] + w[1] * w[1] + w[2] * w[2]
    th = sqrt(th2)
    if th < _SMALL:
        d = 1.0 / 12.0 + th2 / 720.0
    else:
        d = (1.0 - th * sin(th) / (2.0 * (1.0 - cos(th)))) / th2

    cdef double W[9]
    W[0] = 0.0;    W[1] = -w[2]; W[2] = w[1]
    W[3] = w[2];   W[4] = 0.0;   W[5] = -w[0]
    W[6] = -w[1];  W[7] = w[0];  W[8] = 0.0

    cdef double W2[9]
    cdef int i, k
    for i in range(3):
        for j in range(3):
            W2[3 * i + j] = 0.0
            for k in range(3):
                W2[3 * i + j] += W[3 * i + k] * W[3 * k + j]

    cdef double Vinv[9]
    for i in range(3):
        for j in range(3):
            Vinv[3 * i + j] = -0.5 * W[3 * i + j] + d * W2[3 * i + j]
        Vinv[4 * i] += 1.0

    for i in range(3):
        out[i] = Vinv[3 * i] * t[0] + Vinv[3 * i + 1] * t[1] + Vinv[3 * i + 2] * t[2]
    out[3] = w[0]
    out[4] = w[1]
    out[5] = w[2]


def exp_se3(twists):
    """Batched exponential map: (N, 6) twists -> (R, t)."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] tw = \
        np.ascontiguousarray(twists, dtype=np.float64).reshape(-1, 6)
    cdef Py_ssize_t n = tw.shape[0], i
    cdef cnp.ndarray[cnp.float64_t, ndim=3] R = np.empty((n, 3, 3))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] t = np.empty((n, 3))
    for i in range(n):
        _exp_one(&tw[i, 0], &tw[i, 3], &R[i, 0, 0], &t[i, 0])
    return R, t


def log_se3(R, t):
    """Batched logarithm map: (R, t) -> (N, 6) twists."""
    cdef cnp.ndarray[cnp.float64_t, ndim=3] Rc = \
        np.ascontiguousarray(R, dtype=np.float64).reshape(-1, 3, 3)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] tc = \
        np.ascontiguousarray(t, dtype=np.float64).reshape(-1, 3)
    cdef Py_ssize_t n = Rc.shape[0], i
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n, 6))
    for i in range(n):
        _log_one(&Rc[i, 0, 0], &tc[i, 0], &out[i, 0])
    return out


def compose(Ra, ta, Rb, tb):
    """Batched pose composition a * b."""
    cdef cnp.ndarray[cnp.float64_t, ndim=3] A = \
        np.ascontiguousarray(Ra, dtype=np.float64).reshape(-1, 3, 3)
    cdef cnp.ndarray[cnp.float64_t, ndim=3] B = \
        np.ascontiguousarray(Rb, dtype=np.float64).reshape(-1, 3, 3)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] pa = \
        np.ascontiguousarray(ta, dtype=np.float64).reshape(-1, 3)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] pb = \
        np.ascontiguousarray(tb, dtype=np.float64).reshape(-1, 3)
    cdef Py_ssize_t n = A.shape[0], i
    cdef int r, c, k
    cdef cnp.ndarray[cnp.float64_t, ndim=3] R = np.empty((n, 3, 3))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] t = np.empty((n, 3))
    for i in range(n):
        for r in range(3):
            for c in range(3):
                R[i, r, c] = (A[i, r, 0] * B[i, 0, c]
                              + A[i, r, 1] * B[i, 1, c]
                              + A[i, r, 2] * B[i, 2, c])
            t[i, r] = (A[i, r, 0] * pb[i, 0] + A[i, r, 1] * pb[i, 1]
                       + A[i, r, 2] * pb[i, 2] + pa[i, r])
    return R, t


def invert(R, t):
    """Batched pose inversion."""
    cdef cnp.ndarray[cnp.float64_t, ndim=3] Rc = \
        np.ascontiguousarray(R, dtype=np.float64).reshape(-1, 3, 3)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] tc = \
        np.ascontiguousarray(t, dtype=np.float64).reshape(-1, 3)
    cdef Py_ssize_t n = Rc.shape[0], i
    cdef int r, c
    cdef cnp.ndarray[cnp.float64_t, ndim=3] Ri = np.empty((n, 3, 3))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] ti = np.empty((n, 3))
    for i in range(n):
        for r in range(3):
            for c in range(3):
                Ri[i, r, c] = Rc[i, c, r]
        for r in range(3):
            ti[i, r] = -(Ri[i, r, 0] * tc[i, 0] + Ri[i, r, 1] * tc[i, 1]
                         + Ri[i, r, 2] * tc[i, 2])
    return Ri, ti


def rot_angle(Ra, Rb):
    """Geodesic angle ||Log(Ra^T Rb)|| for stacks of rotations.

    atan2 form; see the numpy twin for the conditioning rationale.
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=3] A = \
        np.ascontiguousarray(Ra, dtype=np.float64).reshape(-1, 3, 3)
    cdef cnp.ndarray[cnp.float64_t, ndim=3] B = \
        np.ascontiguousarray(Rb, dtype=np.float64).reshape(-1, 3, 3)
    cdef Py_ssize_t n = A.shape[0], i
    cdef int r, c, k
    cdef double tr, v0, v1, v2
    cdef double Q[9]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n)
    for i in range(n):
        for r in range(3):
            for c in range(3):
                Q[3 * r + c] = 0.0
                for k in range(3):
                    Q[3 * r + c] += A[i, k, r] * B[i, k, c]
        tr = Q[0] + Q[4] + Q[8]
        v0 = 0.5 * (Q[7] - Q[5])
        v1 = 0.5 * (Q[2] - Q[6])
        v2 = 0.5 * (Q[3] - Q[1])
        out[i] = atan2(sqrt(v0 * v0 + v1 * v1 + v2 * v2), (tr - 1.0) * 0.5)
    return out
