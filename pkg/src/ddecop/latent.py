"""Binary latent layer updates: mean-field sweep and exact sequential Gibbs.

The log-odds of flipping one coordinate decompose into a prior term from the
parent layer and a likelihood contrast over the children (binary layers via
their logistic models, the Gaussian layer via a quadratic contrast). The
scalar functions below state those formulas directly; the sweeps use the
vectorized field builders, which agree with the scalar forms exactly.
"""

from __future__ import annotations

import numpy as np

from .model import (
    ModelError,
    child_activation_prob,
    linear_predictors,
    logistic,
    logit,
    softplus,
)


def _prior_field(A, params, d):
    """Prior log-odds for every coordinate of layer d (1-based), shape (n, K^(d))."""
    n = A[0].shape[0]
    if d == params.dims.depth:
        pi = params.pi
        if np.any((pi <= 0.0) | (pi >= 1.0)):
            raise ModelError("top-layer pi must lie strictly inside (0, 1)")
        return np.broadcast_to(logit(pi), (n, pi.shape[0])).copy()
    return linear_predictors(params.B[d], A[d].astype(float))


def _gaussian_contrast_field(A1, Z, params):
    """Gaussian child contrast for every coordinate of layer 1, shape (n, K^(1))."""
    B1 = params.B[0]
    gamma = params.gamma
    if np.any(gamma <= 0):
        raise ModelError("gamma must be positive")
    W = B1[:, 1:]
    resid = Z - linear_predictors(B1, A1)
    c = (W * W / gamma[:, None]).sum(axis=0)
    return (resid / gamma) @ W + A1 * c - 0.5 * c


def _binary_contrast_field(A_parent, A_child, B_d):
    """Child-likelihood contrast for every coordinate of a layer d >= 2.

    A_parent is the layer-d configuration (n, K^(d)), A_child the layer d-1
    values (n, K^(d-1)), and B_d the weight matrix between them.
    """
    H = linear_predictors(B_d, A_parent)
    K = A_parent.shape[1]
    out = np.empty((A_parent.shape[0], K))
    for k in range(K):
        w = B_d[:, 1 + k]
        eta0 = H - A_parent[:, [k]] * w
        eta1 = eta0 + w
        out[:, k] = A_child @ w - (softplus(eta1) - softplus(eta0)).sum(axis=1)
    return out


def log_odds_fields(A, Z, params):
    """All local log-odds, one (n, K^(d)) array per layer, against the frozen A."""
    dims = params.dims
    Af = [a.astype(float) for a in A]
    fields = []
    for d in range(1, dims.depth + 1):
        delta = _prior_field(Af, params, d)
        if d == 1:
            delta = delta + _gaussian_contrast_field(Af[0], Z, params)
        else:
            delta = delta + _binary_contrast_field(Af[d - 1], Af[d - 2], params.B[d - 1])
        fields.append(delta)
    return fields


# -- scalar forms (one row, one coordinate) -----------------------------------

def log_odds_top(i, k, A, params):
    """Full-conditional log-odds of the top-layer coordinate k for row i.

    Requires D >= 2 (binary children); for D == 1 the top layer is the
    shallowest layer and log_odds_bottom applies.
    """
    D = params.dims.depth
    if D < 2:
        raise ModelError("log_odds_top requires a model with D >= 2 layers")
    pi_k = params.pi[k]
    if pi_k <= 0.0 or pi_k >= 1.0:
        raise ModelError("pi_k must lie strictly inside (0, 1)")
    return float(logit(pi_k)) + _binary_contrast_row(i, D, k, A, params)


def log_odds_middle(i, d, k, A, params):
    """Log-odds of coordinate k in an intermediate layer 2 <= d <= D-1."""
    if not 2 <= d <= params.dims.depth - 1:
        raise ModelError("log_odds_middle requires 2 <= d <= D-1")
    alpha = A[d].astype(float)[i]
    prior = float(params.B[d][k, 0] + params.B[d][k, 1:] @ alpha)
    return prior + _binary_contrast_row(i, d, k, A, params)


def log_odds_bottom(i, k, A, Z, params):
    """Log-odds of the shallowest-layer coordinate k for row i.

    For a one-layer model the parent prior degenerates to logit(pi_k).
    """
    if params.dims.depth == 1:
        pi_k = params.pi[k]
        if pi_k <= 0.0 or pi_k >= 1.0:
            raise ModelError("pi_k must lie strictly inside (0, 1)")
        prior = float(logit(pi_k))
    else:
        alpha = A[1].astype(float)[i]
        prior = float(params.B[1][k, 0] + params.B[1][k, 1:] @ alpha)
    return prior + _gaussian_contrast_row(i, k, A, Z, params)


def _gaussian_contrast_row(i, k, A, Z, params):
    if np.any(params.gamma <= 0):
        raise ModelError("gamma must be positive")
    a = A[0].astype(float)[i].copy()
    z = Z[i]
    a[k] = 0.0
    mu0 = params.B[0][:, 0] + params.B[0][:, 1:] @ a
    mu1 = mu0 + params.B[0][:, 1 + k]
    return float(np.sum(((z - mu0) ** 2 - (z - mu1) ** 2) / (2.0 * params.gamma)))


def _binary_contrast_row(i, d, k, A, params):
    """Children contrast of layer-d coordinate k via the layer-to-(d-1) logistic model."""
    B = params.B[d - 1]
    alpha = A[d - 1].astype(float)[i].copy()
    child = A[d - 2][i].astype(float)
    total = 0.0
    for r in range(B.shape[0]):
        alpha[k] = 1.0
        p1 = child_activation_prob(B[r], alpha)
        alpha[k] = 0.0
        p0 = child_activation_prob(B[r], alpha)
        if child[r] == 1.0:
            total += np.log(p1) - np.log(p0)
        else:
            total += np.log1p(-p1) - np.log1p(-p0)
    return float(total)


# -- sweeps -------------------------------------------------------------------

def mean_field_sweep(A, Z, params, temperature, rng):
    """Resample every binary coordinate from tempered log-odds held at A^(t-1).

    All fields are computed against the frozen input configuration before any
    coordinate is drawn, so the result does not depend on evaluation order.
    """
    fields = log_odds_fields(A, Z, params)
    new_A = []
    for delta in fields:
        probs = logistic(temperature * delta)
        new_A.append((rng.random(delta.shape) < probs).astype(np.int8))
    return new_A


def exact_gibbs_sweep(A, Z, params, rng):
    """Sequential exact-Gibbs pass: layers bottom-up, coordinates ascending.

    Each coordinate is drawn from its exact full conditional against the
    in-progress configuration (rows stay independent and are vectorized).
    """
    dims = params.dims
    A = [a.copy() for a in A]
    n = Z.shape[0]
    for d in range(1, dims.depth + 1):
        for k in range(dims.widths[d - 1]):
            Af = [a.astype(float) for a in A]
            delta = _prior_field(Af, params, d)[:, k]
            if d == 1:
                delta = delta + _gaussian_contrast_field(Af[0], Z, params)[:, k]
            else:
                delta = delta + _binary_contrast_field(
                    Af[d - 1], Af[d - 2], params.B[d - 1]
                )[:, k]
            A[d - 1][:, k] = (rng.random(n) < logistic(delta)).astype(np.int8)
    return A
