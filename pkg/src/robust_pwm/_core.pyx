# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for block-wise order-statistic U-statistics.

Mirrors ``robust_pwm._fallback`` function for function.
"""
import numpy as np

cimport numpy as cnp
from libcpp.algorithm cimport sort
from libcpp.vector cimport vector

cnp.import_array()


def block_weighted_sums(const double[:, ::1] X, const cnp.intp_t[::1] order,
                        const cnp.intp_t[::1] offsets, const double[:, ::1] W):
    """Sort each block of each row and dot it with that block's weights.

    Block ``j`` of row ``r`` is ``X[r, order[offsets[j]:offsets[j + 1]]]``.
    """
    cdef Py_ssize_t R = X.shape[0]
    cdef Py_ssize_t K = offsets.shape[0] - 1
    cdef Py_ssize_t r, j, i, lo, size, width = 0
    cdef double acc
    for j in range(K):
        if offsets[j + 1] - offsets[j] > width:
            width = offsets[j + 1] - offsets[j]
    out = np.empty((R, K), dtype=np.float64)
    cdef double[:, ::1] res = out
    cdef vector[double] buf
    buf.resize(width)
    with nogil:
        for r in range(R):
            for j in range(K):
                lo = offsets[j]
                size = offsets[j + 1] - lo
                for i in range(size):
                    buf[i] = X[r, order[lo + i]]
                sort(buf.begin(), buf.begin() + size)
                acc = 0.0
                for i in range(size):
                    acc = acc + W[j, i] * buf[i]
                res[r, j] = acc
    return out


def row_lower_median(const double[:, ::1] E):
    """Lower median of every row: the ``(K - 1) // 2``-th smallest value."""
    cdef Py_ssize_t R = E.shape[0]
    cdef Py_ssize_t K = E.shape[1]
    cdef Py_ssize_t r, j, mid = (K - 1) // 2
    out = np.empty(R, dtype=np.float64)
    cdef double[::1] res = out
    cdef vector[double] buf
    buf.resize(K)
    with nogil:
        for r in range(R):
            for j in range(K):
                buf[j] = E[r, j]
            sort(buf.begin(), buf.end())
            res[r] = buf[mid]
    return out
