# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; same contracts as agenet._kernels_py."""
import math

import numpy as np
cimport numpy as cnp
from libc.math cimport log, exp, INFINITY

cnp.import_array()

cdef double LOG_2PI = 1.8378770664093453


def gaussian_log_prob(X, means, chols):
    cdef const double[:, ::1] x = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[:, ::1] mu = np.ascontiguousarray(means, dtype=np.float64)
    cdef const double[:, :, ::1] L = np.ascontiguousarray(chols, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1], k = mu.shape[0]
    cdef Py_ssize_t i, j, r, c
    cdef double acc, maha, log_det
    out_arr = np.empty((n, k), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] z = np.empty(d, dtype=np.float64)
    for j in range(k):
        log_det = 0.0
        for r in range(d):
            log_det += log(L[j, r, r])
        log_det *= 2.0
        for i in range(n):
            maha = 0.0
            # forward substitution L z = x - mu
            for r in range(d):
                acc = x[i, r] - mu[j, r]
                for c in range(r):
                    acc -= L[j, r, c] * z[c]
                acc /= L[j, r, r]
                z[r] = acc
                maha += acc * acc
            out[i, j] = -0.5 * (d * LOG_2PI + log_det + maha)
    return out_arr


def logsumexp_rows(A):
    cdef const double[:, ::1] a = np.ascontiguousarray(A, dtype=np.float64)
    cdef Py_ssize_t n = a.shape[0], k = a.shape[1], i, j
    cdef double m, s
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    for i in range(n):
        m = -INFINITY
        for j in range(k):
            if a[i, j] > m:
                m = a[i, j]
        if m == -INFINITY or m == INFINITY:
            out[i] = m
            continue
        s = 0.0
        for j in range(k):
            s += exp(a[i, j] - m)
        out[i] = m + log(s)
    return out_arr


def mutual_information_codes(x, y, Py_ssize_t nx, Py_ssize_t ny):
    cdef const cnp.int64_t[::1] xv = np.ascontiguousarray(x, dtype=np.int64)
    cdef const cnp.int64_t[::1] yv = np.ascontiguousarray(y, dtype=np.int64)
    cdef Py_ssize_t n = xv.shape[0], i, a, b
    cdef cnp.int64_t[:, ::1] joint = np.zeros((nx, ny), dtype=np.int64)
    cdef cnp.int64_t[::1] px = np.zeros(nx, dtype=np.int64)
    cdef cnp.int64_t[::1] py = np.zeros(ny, dtype=np.int64)
    for i in range(n):
        joint[xv[i], yv[i]] += 1
        px[xv[i]] += 1
        py[yv[i]] += 1
    terms = []
    cdef double c, dn = <double>n
    for a in range(nx):
        for b in range(ny):
            if joint[a, b] > 0:
                c = <double>joint[a, b]
                terms.append((c / dn) * log(c * dn / (<double>px[a] * <double>py[b])))
    return max(math.fsum(terms), 0.0)
