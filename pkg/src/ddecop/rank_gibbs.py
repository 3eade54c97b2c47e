"""Extended-rank-likelihood data augmentation: truncated-normal Gibbs sweeps.

One sweep resamples every Z_ij from its conditional Normal(mu_ij, gamma_j/tau)
restricted to the interval enforced by the observed within-column orderings.
Columns are independent given (mu, gamma) and use column-indexed RNG
substreams, so results do not depend on how many workers process them.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ._kernels import sweep_column, tn_transform
from .frame import check_rank_consistent
from .model import conditional_means


def sample_truncated_normal(mu, var, lo, hi, rng):
    """One draw from Normal(mu, var) conditioned on the interval (lo, hi).

    Numerically stable in far tails (log-space inverse CDF); never returns an
    infinity or a finite bound exactly.
    """
    if var <= 0:
        raise ValueError("var must be positive")
    if lo > hi:
        raise ValueError(f"contract violation: lo={lo} > hi={hi}")
    if lo == hi:
        return float(lo)
    return float(tn_transform(rng.random(), mu, np.sqrt(var), lo, hi))


def gibbs_sweep_z(frame, state, params, temperature, rng, workers=1):
    """One full Gibbs sweep of Z inside the rank-consistent set, in place.

    Tempering inflates conditional variances to gamma_j / temperature. The
    updated state.Z is returned for convenience.
    """
    if not 0.0 < temperature <= 1.0:
        raise ValueError("temperature must be in (0, 1]")
    Z = state.Z
    check_rank_consistent(frame, Z)
    mu = conditional_means(params, state.A[0].astype(float))
    variances = params.gamma / temperature
    streams = rng.spawn(frame.n_cols)
    uniforms = [streams[j].random(frame.n) for j in range(frame.n_cols)]

    def run(j):
        col = frame.columns[j]
        zj = np.ascontiguousarray(Z[:, j])
        sweep_column(
            zj,
            np.ascontiguousarray(mu[:, j]),
            float(variances[j]),
            col.group_of_row,
            col.group_ptr,
            col.rows_by_group,
            uniforms[j],
        )
        Z[:, j] = zj

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, range(frame.n_cols)))
    else:
        for j in range(frame.n_cols):
            run(j)
    return Z
