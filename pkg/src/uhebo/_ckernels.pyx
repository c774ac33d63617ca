# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops for the Matern 5/2 ARD kernel and nearest-neighbour search.

Every function here has a numpy twin in ``_pykernels`` with the same
signature; ``uhebo.kernels`` picks one at import time.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sqrt

cnp.import_array()

cdef double SQRT5 = 2.23606797749979


def matern52_gram(const double[:, ::1] X1, const double[:, ::1] X2,
                  const double[::1] lengthscales, double signal_variance):
    cdef Py_ssize_t n = X1.shape[0], m = X2.shape[0], d = X1.shape[1]
    cdef Py_ssize_t i, j, h
    cdef double r2, diff, r
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] K = out
    cdef double[::1] inv = np.empty(d, dtype=np.float64)
    for h in range(d):
        inv[h] = 1.0 / lengthscales[h]
    with nogil:
        for i in range(n):
            for j in range(m):
                r2 = 0.0
                for h in range(d):
                    diff = (X1[i, h] - X2[j, h]) * inv[h]
                    r2 = r2 + diff * diff
                r = sqrt(r2)
                K[i, j] = signal_variance * (1.0 + SQRT5 * r + 5.0 * r2 / 3.0) * exp(-SQRT5 * r)
    return out


def matern52_symmetric_gram(const double[:, ::1] X, const double[::1] lengthscales,
                            double signal_variance):
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1]
    cdef Py_ssize_t i, j, h
    cdef double r2, diff, r, v
    out = np.empty((n, n), dtype=np.float64)
    cdef double[:, ::1] K = out
    cdef double[::1] inv = np.empty(d, dtype=np.float64)
    for h in range(d):
        inv[h] = 1.0 / lengthscales[h]
    with nogil:
        for i in range(n):
            K[i, i] = signal_variance
            for j in range(i + 1, n):
                r2 = 0.0
                for h in range(d):
                    diff = (X[i, h] - X[j, h]) * inv[h]
                    r2 = r2 + diff * diff
                r = sqrt(r2)
                v = signal_variance * (1.0 + SQRT5 * r + 5.0 * r2 / 3.0) * exp(-SQRT5 * r)
                K[i, j] = v
                K[j, i] = v
    return out


def matern52_grad_terms(const double[:, ::1] X, const double[::1] lengthscales,
                        double signal_variance, const double[:, ::1] W):
    """Contractions sum_ij W_ij dK_ij/dlog(l_h) for every h, then sum_ij W_ij K_ij.

    W is symmetric and only its lower triangle and diagonal are read.
    """
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1]
    cdef Py_ssize_t i, j, h
    cdef double r2, diff, r, e, c, wk
    out = np.zeros(d + 1, dtype=np.float64)
    cdef double[::1] g = out
    cdef double[::1] inv = np.empty(d, dtype=np.float64)
    cdef double[::1] sq = np.empty(d, dtype=np.float64)
    for h in range(d):
        inv[h] = 1.0 / lengthscales[h]
    with nogil:
        wk = 0.0
        for i in range(n):
            wk = wk + W[i, i] * signal_variance
            for j in range(i):
                r2 = 0.0
                for h in range(d):
                    diff = (X[i, h] - X[j, h]) * inv[h]
                    sq[h] = diff * diff
                    r2 = r2 + sq[h]
                r = sqrt(r2)
                e = signal_variance * exp(-SQRT5 * r)
                # off-diagonal pairs counted twice
                c = 2.0 * W[i, j] * (5.0 / 3.0) * e * (1.0 + SQRT5 * r)
                for h in range(d):
                    g[h] = g[h] + c * sq[h]
                wk = wk + 2.0 * W[i, j] * e * (1.0 + SQRT5 * r + 5.0 * r2 / 3.0)
        g[d] = wk
    return out


def nearest_indices(const double[:, ::1] queries, const double[:, ::1] points):
    cdef Py_ssize_t q = queries.shape[0], n = points.shape[0], d = queries.shape[1]
    cdef Py_ssize_t i, j, h, best
    cdef double dist, diff, best_dist
    out = np.empty(q, dtype=np.intp)
    cdef Py_ssize_t[::1] idx = out
    with nogil:
        for i in range(q):
            best = 0
            best_dist = 1e308
            for j in range(n):
                dist = 0.0
                for h in range(d):
                    diff = queries[i, h] - points[j, h]
                    dist = dist + diff * diff
                # strict comparison keeps the lowest index on ties
                if dist < best_dist:
                    best_dist = dist
                    best = j
            idx[i] = best
    return out
