# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled radial-kernel hot loops; see ``_kernels_py`` for the reference."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, INFINITY

cnp.import_array()


cdef inline double _profile(double r, int power, const double[::1] coeffs) noexcept nogil:
    cdef double t, pw, acc
    cdef Py_ssize_t i
    if r >= 1.0:
        return 0.0
    t = 1.0 - r
    pw = 1.0
    for i in range(power):
        pw = pw * t
    acc = 0.0
    for i in range(coeffs.shape[0] - 1, -1, -1):
        acc = acc * r + coeffs[i]
    return pw * acc


def radial(r, int power, coeffs):
    cdef cnp.ndarray[double, ndim=1] flat = np.ascontiguousarray(r, dtype=float).ravel()
    cdef const double[::1] cf = np.ascontiguousarray(coeffs, dtype=float)
    cdef cnp.ndarray[double, ndim=1] out = np.empty(flat.shape[0])
    cdef double[::1] ov = out
    cdef double[::1] rv = flat
    cdef Py_ssize_t i
    with nogil:
        for i in range(rv.shape[0]):
            ov[i] = _profile(rv[i], power, cf)
    return out.reshape(np.shape(r))


def pairwise_distances(X, Y):
    cdef const double[:, ::1] xv = np.ascontiguousarray(X, dtype=float)
    cdef const double[:, ::1] yv = np.ascontiguousarray(Y, dtype=float)
    cdef Py_ssize_t N = xv.shape[0], M = yv.shape[0], n = xv.shape[1]
    cdef cnp.ndarray[double, ndim=2] out = np.empty((N, M))
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, j, k
    cdef double acc, diff
    with nogil:
        for i in range(N):
            for j in range(M):
                acc = 0.0
                for k in range(n):
                    diff = xv[i, k] - yv[j, k]
                    acc = acc + diff * diff
                ov[i, j] = sqrt(acc)
    return out


def cross_kernel(X, Y, double scale, int power, coeffs):
    cdef const double[:, ::1] xv = np.ascontiguousarray(X, dtype=float)
    cdef const double[:, ::1] yv = np.ascontiguousarray(Y, dtype=float)
    cdef const double[::1] cf = np.ascontiguousarray(coeffs, dtype=float)
    cdef Py_ssize_t N = xv.shape[0], M = yv.shape[0], n = xv.shape[1]
    cdef cnp.ndarray[double, ndim=2] out = np.empty((N, M))
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, j, k
    cdef double acc, diff
    with nogil:
        for i in range(N):
            for j in range(M):
                acc = 0.0
                for k in range(n):
                    diff = xv[i, k] - yv[j, k]
                    acc = acc + diff * diff
                ov[i, j] = _profile(sqrt(acc) / scale, power, cf)
    return out


def min_distances(P, C):
    cdef const double[:, ::1] pv = np.ascontiguousarray(P, dtype=float)
    cdef const double[:, ::1] cv = np.ascontiguousarray(C, dtype=float)
    cdef Py_ssize_t N = pv.shape[0], M = cv.shape[0], n = pv.shape[1]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(N)
    cdef double[::1] ov = out
    cdef Py_ssize_t i, j, k
    cdef double acc, diff, best
    with nogil:
        for i in range(N):
            best = INFINITY
            for j in range(M):
                acc = 0.0
                for k in range(n):
                    diff = pv[i, k] - cv[j, k]
                    acc = acc + diff * diff
                if acc < best:
                    best = acc
            ov[i] = sqrt(best)
    return out
