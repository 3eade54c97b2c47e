"""Pure-Python reference implementation of the hot sampling kernels.

Mirrors ``_zcore`` (the Cython extension) operation for operation: both
backends consume the same pre-drawn uniforms and call the same cephes
routines (scipy.special), so their outputs agree bit for bit on one machine.
"""

import math

import numpy as np
from scipy.special import log_ndtr, ndtr, ndtri, ndtri_exp

# Keeps uniforms strictly inside (0, 1); rng.random() can return exactly 0.0.
_U_EPS = 1.1102230246251565e-16


def _logaddexp(x, y):
    if x == -math.inf:
        return y
    if y == -math.inf:
        return x
    if x >= y:
        return x + math.log1p(math.exp(y - x))
    return y + math.log1p(math.exp(x - y))


def tn_transform(u, mu, sigma, lo, hi):
    """Map one uniform draw to Normal(mu, sigma^2) conditioned on (lo, hi).

    Inverse-CDF sampling with log-space tail handling, stable arbitrarily far
    into either tail. Never returns an infinity or a finite bound exactly:
    underflowed values are nudged 1e3 ulps into the interval interior.
    """
    if u < _U_EPS:
        u = _U_EPS
    elif u > 1.0 - _U_EPS:
        u = 1.0 - _U_EPS
    a = (lo - mu) / sigma
    b = (hi - mu) / sigma
    if a >= 0.0:
        # interval in the upper tail: interpolate survival probs in log space
        la = float(log_ndtr(-a))
        lb = float(log_ndtr(-b)) if b != math.inf else -math.inf
        lp = _logaddexp(la + math.log1p(-u), lb + math.log(u))
        x = -float(ndtri_exp(lp))
    elif b <= 0.0:
        la = float(log_ndtr(a)) if a != -math.inf else -math.inf
        lb = float(log_ndtr(b))
        lp = _logaddexp(la + math.log1p(-u), lb + math.log(u))
        x = float(ndtri_exp(lp))
    else:
        pa = float(ndtr(a))
        pb = float(ndtr(b))
        x = float(ndtri(pa + u * (pb - pa)))
    res = mu + sigma * x
    if lo != -math.inf and res <= lo:
        res = lo + 1000.0 * math.ulp(lo)
    if hi != math.inf and res >= hi:
        res = hi - 1000.0 * math.ulp(hi)
    if not (lo < res < hi):
        # interval narrower than the nudge: fall back to the midpoint
        res = lo + 0.5 * (hi - lo)
    return res


def sweep_column(z, mu, var, group_of_row, group_ptr, rows_by_group, u):
    """One Gibbs pass over a single column of Z, in place.

    Cells are visited in ascending row order. The truncation bounds of a cell
    in tie-group g are the running maximum of group g-1 and the running
    minimum of group g+1 (rank consistency orders whole groups, so only the
    adjacent groups bind). Group extrema are refreshed after each update.
    """
    n = z.shape[0]
    n_groups = group_ptr.shape[0] - 1
    sigma = math.sqrt(var)
    gmax = np.full(n_groups, -math.inf)
    gmin = np.full(n_groups, math.inf)
    for g in range(n_groups):
        seg = z[rows_by_group[group_ptr[g]:group_ptr[g + 1]]]
        gmax[g] = seg.max()
        gmin[g] = seg.min()
    for i in range(n):
        g = group_of_row[i]
        lo = gmax[g - 1] if g > 0 else -math.inf
        hi = gmin[g + 1] if g + 1 < n_groups else math.inf
        old = z[i]
        x = tn_transform(u[i], mu[i], sigma, lo, hi)
        z[i] = x
        if x >= gmax[g]:
            gmax[g] = x
        elif old == gmax[g]:
            gmax[g] = z[rows_by_group[group_ptr[g]:group_ptr[g + 1]]].max()
        if x <= gmin[g]:
            gmin[g] = x
        elif old == gmin[g]:
            gmin[g] = z[rows_by_group[group_ptr[g]:group_ptr[g + 1]]].min()
