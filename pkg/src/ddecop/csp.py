"""Layer-wise cumulative shrinkage: allocations, sticks, slab scales, penalties.

Each latent column k of a layer carries an allocation c_k in {1, ..., K_max+1}.
Columns with c_k <= k sit in the spike (a tight Laplace with scale lambda1)
and count as inactive; columns with c_k > k sit in the slab (Laplace scale
mixed over a Gamma) and contribute to the effective layer width. Allocation
indices are 1-based to keep the c_k > k rule literal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SLAB_SHAPE = 1.0  # Gamma hyperprior on the slab rate ...
SLAB_RATE = 5.0  # ... fixed by the closed-form slab marginal


@dataclass
class CspLayerState:
    c: np.ndarray  # (K_max,) int allocations, values in 1..K_max+1
    v: np.ndarray  # (K_max+1,) stick variables, last entry 1
    omega: np.ndarray  # (K_max+1,) stick-breaking weights, sums to 1
    lambda0: np.ndarray  # (K_max,) slab scales (lambda1 for inactive columns)
    lambda1: float  # spike scale, constant across iterations
    alpha: float  # stick concentration (= K_max)

    @property
    def k_max(self):
        return self.c.shape[0]

    def active_columns(self):
        """Boolean mask of slab-allocated (active) columns."""
        return self.c > np.arange(1, self.k_max + 1)

    def copy(self):
        return CspLayerState(
            self.c.copy(), self.v.copy(), self.omega.copy(),
            self.lambda0.copy(), self.lambda1, self.alpha,
        )


def stick_break(v):
    """omega_l = v_l * prod_{m<l} (1 - v_m)."""
    v = np.asarray(v, dtype=float)
    lead = np.concatenate(([1.0], np.cumprod(1.0 - v[:-1])))
    return v * lead


def initial_csp_state(k_max, lambda1):
    """Start fully active: every allocation in the terminal slab state."""
    c = np.full(k_max, k_max + 1, dtype=np.int64)
    v = np.full(k_max + 1, 1.0 / (1.0 + k_max))
    v[-1] = 1.0
    return CspLayerState(c, v, stick_break(v), np.ones(k_max), float(lambda1), float(k_max))


def default_lambda1(observed_dim, depth):
    """Per-layer spike scales: tighter in deep layers, looser at high J."""
    first, second = (0.05, 0.1) if observed_dim >= 100 else (0.02, 0.04)
    scales = [first, second] + [0.005] * max(0, depth - 2)
    return tuple(scales[:depth])


def spike_log_marginal(col, lambda1):
    """Laplace(scale lambda1) log density of a coefficient column."""
    if lambda1 <= 0:
        raise ValueError("lambda1 must be positive")
    col = np.asarray(col, dtype=float)
    m = col.size
    return float(-m * math.log(2.0 * lambda1) - np.abs(col).sum() / lambda1)


def slab_log_marginal(col, m):
    """Laplace column marginal with the rate integrated over Gamma(1, 5)."""
    if m < 1:
        raise ValueError("slab marginal needs at least one active row")
    col = np.asarray(col, dtype=float)
    return float(
        math.log(SLAB_RATE)
        - m * math.log(2.0)
        + math.lgamma(1.0 + m)
        - (1.0 + m) * math.log(SLAB_RATE + np.abs(col).sum())
    )


def allocate_c(layer, B, active_rows=None):
    """MAP allocation of every column: argmax_l log(omega_l) + spike/slab score.

    Column norms are taken over ``active_rows`` of B (all rows by default).
    States l <= k score the column under the spike, states l > k under the
    slab; ties resolve to the smallest l.
    """
    k_max = layer.k_max
    if active_rows is None:
        active_rows = np.arange(B.shape[0])
    m = len(active_rows)
    if m == 0:
        return np.ones(k_max, dtype=np.int64)
    log_omega = np.log(np.clip(layer.omega, 1e-300, None))
    states = np.arange(1, k_max + 2)
    c = np.empty(k_max, dtype=np.int64)
    for k0 in range(k_max):
        col = B[active_rows, 1 + k0]
        spike = spike_log_marginal(col, layer.lambda1)
        slab = slab_log_marginal(col, m)
        scores = log_omega + np.where(states <= k0 + 1, spike, slab)
        c[k0] = int(np.argmax(scores)) + 1
    return c


def update_sticks(c, alpha, rng):
    """Resample stick variables from Beta(1 + n_l, alpha + n_{>l}) given counts."""
    c = np.asarray(c)
    k_max = c.shape[0]
    states = np.arange(1, k_max + 1)
    n_eq = (c[None, :] == states[:, None]).sum(axis=1)
    n_gt = (c[None, :] > states[:, None]).sum(axis=1)
    v = np.empty(k_max + 1)
    v[:k_max] = rng.beta(1.0 + n_eq, alpha + n_gt)
    v[k_max] = 1.0
    return v, stick_break(v)


def sample_slab_rates(layer, B, m, rng, active_rows=None):
    """Resample slab scales of active columns from Gamma(1 + m, 5 + ||col||_1).

    Inactive columns keep the spike scale. The Gamma's second argument is a
    rate, so draws use scale = 1 / rate.
    """
    k_max = layer.k_max
    if active_rows is None:
        active_rows = np.arange(B.shape[0])
    lambda0 = np.full(k_max, layer.lambda1)
    active = layer.active_columns()
    for k0 in range(k_max):
        if not active[k0]:
            continue
        norm = float(np.abs(B[active_rows, 1 + k0]).sum())
        lambda0[k0] = rng.gamma(SLAB_SHAPE + m, 1.0 / (SLAB_RATE + norm))
    return lambda0


def penalty_weights(layer, n_rows):
    """Per-entry l1 weights for the next M-step: 1/scale, intercept unpenalized."""
    active = layer.active_columns()
    lam = np.where(active, layer.lambda0, layer.lambda1)
    if np.any(lam <= 0):
        raise ValueError("penalty scales must be positive")
    row = np.concatenate(([0.0], 1.0 / lam))
    return np.tile(row, (n_rows, 1))


def effective_width(c):
    """Number of slab-allocated columns: sum_k 1(c_k > k)."""
    c = np.asarray(c)
    return int(np.sum(c > np.arange(1, c.shape[0] + 1)))
