# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False
"""Cython implementations of the hot path kernels.

Twin of `refbm._kernels_py`: same operations, same FP order, compiled with
-ffp-contract=off so both backends agree bitwise.
"""

import numpy as np

cimport numpy as cnp

NAME = "cython"


def prefix_min(double[::1] x, double[::1] out):
    cdef Py_ssize_t i, n = x.shape[0]
    cdef double m
    if n == 0:
        return
    with nogil:
        m = x[0]
        out[0] = m
        for i in range(1, n):
            if x[i] < m:
                m = x[i]
            out[i] = m


def reflect_path(double[::1] y, double gamma, double[::1] out):
    cdef Py_ssize_t i, n = y.shape[0]
    cdef double m
    if n == 0:
        return
    with nogil:
        m = y[0]
        out[0] = y[0] - gamma * m
        for i in range(1, n):
            if y[i] < m:
                m = y[i]
            out[i] = y[i] - gamma * m


def passage_scan(double[::1] w, double u):
    cdef Py_ssize_t i, n = w.shape[0]
    cdef Py_ssize_t first = -1, last = -1
    with nogil:
        for i in range(n):
            if w[i] > u:
                if first < 0:
                    first = i
                last = i
    return first, last


def reflect_passage_scan(double[:, ::1] y, double gamma, double u,
                         cnp.int64_t[::1] first, cnp.int64_t[::1] last,
                         double[::1] wmax):
    cdef Py_ssize_t r, i, m = y.shape[0], n = y.shape[1]
    cdef double lo, w, wmx
    cdef Py_ssize_t f, l
    with nogil:
        for r in range(m):
            lo = y[r, 0]
            w = y[r, 0] - gamma * lo
            wmx = w
            f = 0 if w > u else -1
            l = f
            for i in range(1, n):
                if y[r, i] < lo:
                    lo = y[r, i]
                w = y[r, i] - gamma * lo
                if w > wmx:
                    wmx = w
                if w > u:
                    if f < 0:
                        f = i
                    l = i
            first[r] = f
            last[r] = l
            wmax[r] = wmx


def weighted_sup(double[:, ::1] v, double[::1] penalty, double scale,
                 double[::1] out):
    cdef Py_ssize_t r, j, m = v.shape[0], n = v.shape[1]
    cdef double best, val
    with nogil:
        for r in range(m):
            best = scale * v[r, 0] - penalty[0]
            for j in range(1, n):
                val = scale * v[r, j] - penalty[j]
                if val > best:
                    best = val
            out[r] = best


def weighted_running_sup(double[:, ::1] v, double[::1] penalty, double scale,
                         cnp.int64_t[::1] cuts, double[:, ::1] out):
    cdef Py_ssize_t r, j, k, m = v.shape[0], n = v.shape[1]
    cdef Py_ssize_t ncuts = cuts.shape[0]
    cdef double best, val
    with nogil:
        for r in range(m):
            best = scale * v[r, 0] - penalty[0]
            k = 0
            for j in range(n):
                if j > 0:
                    val = scale * v[r, j] - penalty[j]
                    if val > best:
                        best = val
                while k < ncuts and cuts[k] == j:
                    out[r, k] = best
                    k += 1


def scaled_sup(double[:, ::1] v, double[::1] weights, double[::1] out):
    cdef Py_ssize_t r, j, m = v.shape[0], n = v.shape[1]
    cdef double best, val
    with nogil:
        for r in range(m):
            best = v[r, 0] * weights[0]
            for j in range(1, n):
                val = v[r, j] * weights[j]
                if val > best:
                    best = val
            out[r] = best
