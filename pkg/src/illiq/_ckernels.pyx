# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: piecewise-linear evaluation and simplex pivoting."""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY, isnan, NAN

cnp.import_array()


def pwl_eval(const double[:] bps, const double[:] slopes, const double[:] vals,
             double offset, const double[:] xs):
    cdef Py_ssize_t k = bps.shape[0]
    cdef Py_ssize_t nx = xs.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(nx, dtype=np.float64)
    cdef Py_ssize_t n, lo, hi, mid, i
    cdef double x, dx
    for n in range(nx):
        x = xs[n]
        if isnan(x):
            out[n] = NAN
            continue
        if k == 0:
            out[n] = slopes[0] * x + offset
            continue
        lo = 0
        hi = k
        while lo < hi:
            mid = (lo + hi) // 2
            if bps[mid] <= x:
                lo = mid + 1
            else:
                hi = mid
        i = lo
        if i == 0:
            if slopes[0] == -INFINITY:
                out[n] = INFINITY
            else:
                out[n] = vals[0] + slopes[0] * (x - bps[0])
        elif i == k:
            dx = x - bps[k - 1]
            if dx == 0.0:
                out[n] = vals[k - 1]
            elif slopes[k] == INFINITY:
                out[n] = INFINITY
            else:
                out[n] = vals[k - 1] + slopes[k] * dx
        else:
            out[n] = vals[i - 1] + slopes[i] * (x - bps[i - 1])
    return out


def eta_update(double[:, ::1] binv, const double[:] d, Py_ssize_t r):
    cdef Py_ssize_t m = binv.shape[0]
    cdef Py_ssize_t i, j
    cdef double piv = d[r]
    cdef double f
    for j in range(m):
        binv[r, j] = binv[r, j] / piv
    for i in range(m):
        if i == r:
            continue
        f = d[i]
        if f != 0.0:
            for j in range(m):
                binv[i, j] -= f * binv[r, j]


def ratio_test(const double[:] xb, const double[:] d, const long[:] basis, double tol,
               double delta):
    cdef Py_ssize_t i
    cdef Py_ssize_t m = d.shape[0]
    cdef Py_ssize_t best = -1
    cdef long best_var = -1
    cdef double best_ratio = INFINITY
    cdef double bound = INFINITY
    cdef double best_piv = 0.0
    cdef double ratio, xv
    if delta > 0.0:
        for i in range(m):
            if d[i] > tol:
                xv = xb[i] if xb[i] > 0.0 else 0.0
                ratio = (xv + delta) / d[i]
                if ratio < bound:
                    bound = ratio
        if bound == INFINITY:
            return -1
        for i in range(m):
            if d[i] > tol:
                xv = xb[i] if xb[i] > 0.0 else 0.0
                if xv / d[i] <= bound and d[i] > best_piv:
                    best_piv = d[i]
                    best = i
        return best
    for i in range(m):
        if d[i] > tol:
            xv = xb[i]
            if xv < 0.0:
                xv = 0.0
            ratio = xv / d[i]
            if ratio < best_ratio - 1e-12 or (ratio <= best_ratio + 1e-12 and basis[i] < best_var):
                if ratio < best_ratio:
                    best_ratio = ratio
                best = i
                best_var = basis[i]
    return best
