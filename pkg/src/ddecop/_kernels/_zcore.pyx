# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled sampling kernels: truncated-normal transform and column Gibbs sweep.

Twin of ``pyref``; both consume the same uniforms and call the same cephes
routines, so outputs agree bit for bit with the pure-Python fallback.
"""

from libc.math cimport INFINITY, exp, log, log1p, nextafter, sqrt

from scipy.special.cython_special cimport log_ndtr, ndtr, ndtri, ndtri_exp

import numpy as np

cdef double _U_EPS = 1.1102230246251565e-16


cdef inline double _ulp(double x) noexcept nogil:
    # matches math.ulp: nextafter(|x|, inf) - |x|
    cdef double ax = x if x >= 0.0 else -x
    return nextafter(ax, INFINITY) - ax


cdef inline double _logaddexp(double x, double y) noexcept nogil:
    if x == -INFINITY:
        return y
    if y == -INFINITY:
        return x
    if x >= y:
        return x + log1p(exp(y - x))
    return y + log1p(exp(x - y))


cdef double _tn_transform(double u, double mu, double sigma, double lo, double hi) noexcept nogil:
    cdef double a, b, la, lb, lp, pa, pb, x, res
    if u < _U_EPS:
        u = _U_EPS
    elif u > 1.0 - _U_EPS:
        u = 1.0 - _U_EPS
    a = (lo - mu) / sigma
    b = (hi - mu) / sigma
    if a >= 0.0:
        la = log_ndtr(-a)
        lb = log_ndtr(-b) if b != INFINITY else -INFINITY
        lp = _logaddexp(la + log1p(-u), lb + log(u))
        x = -ndtri_exp(lp)
    elif b <= 0.0:
        la = log_ndtr(a) if a != -INFINITY else -INFINITY
        lb = log_ndtr(b)
        lp = _logaddexp(la + log1p(-u), lb + log(u))
        x = ndtri_exp(lp)
    else:
        pa = ndtr(a)
        pb = ndtr(b)
        x = ndtri(pa + u * (pb - pa))
    res = mu + sigma * x
    if lo != -INFINITY and res <= lo:
        res = lo + 1000.0 * _ulp(lo)
    if hi != INFINITY and res >= hi:
        res = hi - 1000.0 * _ulp(hi)
    if not (lo < res < hi):
        res = lo + 0.5 * (hi - lo)
    return res


def tn_transform(double u, double mu, double sigma, double lo, double hi):
    return _tn_transform(u, mu, sigma, lo, hi)


def sweep_column(double[::1] z, double[::1] mu, double var,
                 long[::1] group_of_row, long[::1] group_ptr,
                 long[::1] rows_by_group, double[::1] u):
    """One Gibbs pass over a single column of Z, in place (see pyref twin)."""
    cdef Py_ssize_t n = z.shape[0]
    cdef Py_ssize_t n_groups = group_ptr.shape[0] - 1
    cdef double sigma = sqrt(var)
    cdef double[::1] gmax = np.empty(n_groups)
    cdef double[::1] gmin = np.empty(n_groups)
    cdef Py_ssize_t g, i, s, e, r
    cdef double lo, hi, old, x, v
    with nogil:
        for g in range(n_groups):
            lo = INFINITY
            hi = -INFINITY
            for r in range(group_ptr[g], group_ptr[g + 1]):
                v = z[rows_by_group[r]]
                if v < lo:
                    lo = v
                if v > hi:
                    hi = v
            gmin[g] = lo
            gmax[g] = hi
        for i in range(n):
            g = group_of_row[i]
            lo = gmax[g - 1] if g > 0 else -INFINITY
            hi = gmin[g + 1] if g + 1 < n_groups else INFINITY
            old = z[i]
            x = _tn_transform(u[i], mu[i], sigma, lo, hi)
            z[i] = x
            if x >= gmax[g]:
                gmax[g] = x
            elif old == gmax[g]:
                v = -INFINITY
                for r in range(group_ptr[g], group_ptr[g + 1]):
                    if z[rows_by_group[r]] > v:
                        v = z[rows_by_group[r]]
                gmax[g] = v
            if x <= gmin[g]:
                gmin[g] = x
            elif old == gmin[g]:
                v = INFINITY
                for r in range(group_ptr[g], group_ptr[g + 1]):
                    if z[rows_by_group[r]] < v:
                        v = z[rows_by_group[r]]
                gmin[g] = v
