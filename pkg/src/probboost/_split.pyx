# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled split search; mirrors ``_split_py.best_split`` operation for operation."""

from libc.math cimport INFINITY, fabs

import numpy as np

cdef double TIE_RTOL = 1e-12


cdef inline double _gain(double left, double total, double nl, double m) nogil:
    cdef double right = total - left
    return left * left / nl + right * right / (m - nl) - total * total / m


def best_split(const double[:, ::1] X, const double[::1] targets, const long[:, ::1] order, double mean):
    cdef Py_ssize_t d = order.shape[0]
    cdef Py_ssize_t m = order.shape[1]
    cdef Py_ssize_t j, k
    cdef double total, csum, g, top, cut, lo, hi, threshold
    cdef double fm = <double>m
    cdef Py_ssize_t best_j = -1, best_k = -1

    if m < 2:
        return -1, 0.0, 0.0

    cdef double[::1] totals = np.empty(d)
    top = -INFINITY
    with nogil:
        for j in range(d):
            csum = 0.0
            for k in range(m):
                csum = csum + (targets[order[j, k]] - mean)
            totals[j] = csum
            csum = 0.0
            for k in range(m - 1):
                csum = csum + (targets[order[j, k]] - mean)
                if X[order[j, k + 1], j] > X[order[j, k], j]:
                    g = _gain(csum, totals[j], <double>(k + 1), fm)
                    if g > top:
                        top = g
        if top != -INFINITY:
            cut = top - TIE_RTOL * fabs(top)
            for j in range(d):
                csum = 0.0
                for k in range(m - 1):
                    csum = csum + (targets[order[j, k]] - mean)
                    if X[order[j, k + 1], j] > X[order[j, k], j]:
                        g = _gain(csum, totals[j], <double>(k + 1), fm)
                        if g >= cut:
                            best_j = j
                            best_k = k
                            break
                if best_j >= 0:
                    break

    if best_j < 0:
        return -1, 0.0, 0.0
    lo = X[order[best_j, best_k], best_j]
    hi = X[order[best_j, best_k + 1], best_j]
    threshold = 0.5 * (lo + hi)
    if not threshold < hi:
        threshold = lo
    csum = 0.0
    for k in range(best_k + 1):
        csum = csum + (targets[order[best_j, k]] - mean)
    return int(best_j), float(threshold), float(_gain(csum, totals[best_j], <double>(best_k + 1), fm))
