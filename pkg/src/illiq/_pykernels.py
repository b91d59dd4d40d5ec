"""Pure-Python versions of the hot loops in ``_ckernels.pyx``.

Both modules expose the same three functions; ``illiq._kernels`` picks one
at import time.
"""

import math

import numpy as np


def pwl_eval(bps, slopes, vals, offset, xs):
    """Evaluate a piecewise-linear convex function at every point of ``xs``."""
    k = bps.shape[0]
    out = np.empty(xs.shape[0], dtype=float)
    for n in range(xs.shape[0]):
        x = xs[n]
        if math.isnan(x):
            out[n] = math.nan
            continue
        if k == 0:
            out[n] = slopes[0] * x + offset
            continue
        lo, hi = 0, k
        while lo < hi:
            mid = (lo + hi) // 2
            if bps[mid] <= x:
                lo = mid + 1
            else:
                hi = mid
        i = lo  # number of breakpoints <= x
        if i == 0:
            if slopes[0] == -math.inf:
                out[n] = math.inf
            else:
                out[n] = vals[0] + slopes[0] * (x - bps[0])
        elif i == k:
            dx = x - bps[k - 1]
            if dx == 0.0:
                out[n] = vals[k - 1]
            elif slopes[k] == math.inf:
                out[n] = math.inf
            else:
                out[n] = vals[k - 1] + slopes[k] * dx
        else:
            out[n] = vals[i - 1] + slopes[i] * (x - bps[i - 1])
    return out


def eta_update(binv, d, r):
    """Rank-one update of a dense basis inverse after pivoting on row ``r``.

    ``d`` is the entering column expressed in the current basis.
    """
    m = binv.shape[0]
    piv = d[r]
    row = binv[r, :] / piv
    for i in range(m):
        if i != r and d[i] != 0.0:
            binv[i, :] -= d[i] * row
    binv[r, :] = row


def ratio_test(xb, d, basis, tol, delta):
    """Leaving row for the entering direction ``d``.

    With ``delta > 0`` a two-pass (Harris) test: the step bound uses
    ``xb + delta`` and among rows within that bound the largest pivot wins.
    With ``delta == 0`` the exact minimum ratio, ties to the smallest basic
    index (Bland).  Returns -1 when no entry of ``d`` exceeds ``tol``.
    """
    m = d.shape[0]
    if delta > 0.0:
        bound = math.inf
        for i in range(m):
            if d[i] > tol:
                r = (max(xb[i], 0.0) + delta) / d[i]
                if r < bound:
                    bound = r
        if bound == math.inf:
            return -1
        best = -1
        best_piv = 0.0
        for i in range(m):
            if d[i] > tol and max(xb[i], 0.0) / d[i] <= bound and d[i] > best_piv:
                best_piv = d[i]
                best = i
        return best
    best = -1
    best_ratio = math.inf
    best_var = -1
    for i in range(m):
        if d[i] > tol:
            ratio = max(xb[i], 0.0) / d[i]
            if ratio < best_ratio - 1e-12 or (
                ratio <= best_ratio + 1e-12 and basis[i] < best_var
            ):
                if ratio < best_ratio:
                    best_ratio = ratio
                best = i
                best_var = basis[i]
    return best
