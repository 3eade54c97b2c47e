"""Model parameterization, forward sampling, complete-data densities.

Layer convention: layer d runs from 1 (adjacent to the Gaussian variables Z)
up to D (the top Bernoulli layer). In code, lists are 0-indexed, so
``params.B[0]`` is the weight matrix into Z and ``state.A[0]`` the shallowest
binary layer. Every weight matrix stores its intercept as column 0; row r of
``B[d]`` parameterizes child r of layer d+1 (for ``B[0]``, child r is Z_r).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

PROB_CLAMP = 1e-12  # probabilities clamped this far from {0, 1} before logits


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class DdeDims:
    """Layer widths of a D-layer network over J observed variables."""

    depth: int
    widths: tuple
    observed_dim: int

    def __post_init__(self):
        if self.depth < 1 or len(self.widths) != self.depth:
            raise ModelError("depth must be >= 1 and match len(widths)")
        if self.observed_dim < 1:
            raise ModelError("observed_dim must be positive")
        ks = list(self.widths)
        if any(k < 1 for k in ks):
            raise ModelError("layer widths must be positive")
        if any(ks[d + 1] > ks[d] for d in range(len(ks) - 1)) or ks[0] > self.observed_dim:
            raise ModelError("widths must satisfy K^(D) <= ... <= K^(1) <= J")

    @classmethod
    def maximal(cls, observed_dim, depth):
        """Maximal admissible widths: each layer a third of the previous one."""
        widths = []
        prev = observed_dim
        for _ in range(depth):
            prev = prev // 3
            if prev < 1:
                raise ModelError(
                    f"depth {depth} too large for {observed_dim} observed variables"
                )
            widths.append(prev)
        return cls(depth, tuple(widths), observed_dim)

    @staticmethod
    def max_feasible_depth(observed_dim):
        """Deepest network whose maximal widths stay positive."""
        depth = 0
        prev = observed_dim // 3
        while prev >= 1:
            depth += 1
            prev //= 3
        return depth

    def rows_of_layer(self, d):
        """Row count of B^(d) (1-based d): J for d=1, else K^(d-1)."""
        return self.observed_dim if d == 1 else self.widths[d - 2]


@dataclass
class DdeParams:
    """Full parameter set: weight matrices, residual variances, top probabilities."""

    dims: DdeDims
    B: list  # B[d-1] has shape (rows_of_layer(d), 1 + K^(d))
    gamma: np.ndarray  # (J,) positive
    pi: np.ndarray  # (K^(D),) in [0, 1]

    def __post_init__(self):
        self.B = [np.asarray(b, dtype=float) for b in self.B]
        self.gamma = np.asarray(self.gamma, dtype=float)
        self.pi = np.asarray(self.pi, dtype=float)
        self.validate()

    def validate(self):
        dims = self.dims
        if len(self.B) != dims.depth:
            raise ModelError("B must hold one matrix per layer")
        for d in range(1, dims.depth + 1):
            want = (dims.rows_of_layer(d), 1 + dims.widths[d - 1])
            if self.B[d - 1].shape != want:
                raise ModelError(f"B^({d}) has shape {self.B[d - 1].shape}, expected {want}")
            if not np.all(np.isfinite(self.B[d - 1])):
                raise ModelError(f"B^({d}) contains non-finite entries")
        if self.gamma.shape != (dims.observed_dim,) or np.any(self.gamma <= 0):
            raise ModelError("gamma must be J positive variances")
        if self.pi.shape != (dims.widths[-1],) or np.any((self.pi < 0) | (self.pi > 1)):
            raise ModelError("pi must be K^(D) probabilities")

    def copy(self):
        return DdeParams(
            self.dims, [b.copy() for b in self.B], self.gamma.copy(), self.pi.copy()
        )


@dataclass
class LatentState:
    """Augmented data: binary layer matrices A and the latent Gaussian matrix Z."""

    A: list  # A[d-1] has shape (n, K^(d)), entries in {0, 1}
    Z: np.ndarray  # (n, J)

    @property
    def n(self):
        return self.Z.shape[0]

    def copy(self):
        return LatentState([a.copy() for a in self.A], self.Z.copy())


def logistic(x):
    """Stable elementwise 1 / (1 + exp(-x)); saturates without overflow."""
    x = np.asarray(x, dtype=float)
    e = np.exp(-np.abs(x))  # never overflows
    out = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    if out.ndim == 0:
        return float(out)
    return out


def logit(p):
    p = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return np.log(p) - np.log1p(-p)


def softplus(x):
    """log(1 + exp(x)) without overflow."""
    return np.logaddexp(0.0, x)


def child_activation_prob(row, alpha):
    """Activation probability of one child: logistic(beta_0 + sum_l beta_l alpha_l)."""
    row = np.asarray(row, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if row.shape[0] != 1 + alpha.shape[0]:
        raise ModelError(
            f"weight row has {row.shape[0]} entries, expected {1 + alpha.shape[0]}"
        )
    return float(logistic(row[0] + row[1:] @ alpha))


def linear_predictors(B_d, A_d):
    """Linear predictors for all children of one layer: (n, rows) array."""
    return A_d @ B_d[:, 1:].T + B_d[:, 0]


def conditional_means(params, A1):
    """Conditional means of Z given the shallowest binary layer."""
    return linear_predictors(params.B[0], A1)


def ancestral_sample(params, n, rng):
    """Draw n independent rows of (A^(D), ..., A^(1), Z) from the model."""
    dims = params.dims
    A = [None] * dims.depth
    top = (rng.random((n, dims.widths[-1])) < params.pi).astype(np.int8)
    A[dims.depth - 1] = top
    for d in range(dims.depth - 1, 0, -1):  # d is the child layer (1-based)
        probs = logistic(linear_predictors(params.B[d], A[d].astype(float)))
        A[d - 1] = (rng.random(probs.shape) < probs).astype(np.int8)
    mu = conditional_means(params, A[0].astype(float))
    Z = mu + np.sqrt(params.gamma) * rng.standard_normal((n, dims.observed_dim))
    return LatentState(A, Z)


def complete_log_density(params, state, row):
    """Joint log density of (Z_i, A_i^(1..D)) for one row i."""
    dims = params.dims
    if np.any(params.gamma <= 0):
        raise ModelError("gamma must be positive")
    i = row
    a_top = state.A[dims.depth - 1][i].astype(float)
    pi = params.pi
    with np.errstate(divide="ignore"):
        top_terms = np.where(a_top == 1.0, np.log(pi), np.log1p(-pi))
    total = float(np.sum(top_terms))  # -inf for zero-probability configurations
    for d in range(dims.depth, 1, -1):  # p(A^(d-1) | A^(d))
        eta = linear_predictors(params.B[d - 1], state.A[d - 1][i].astype(float)[None, :])[0]
        a = state.A[d - 2][i].astype(float)
        total += float(np.sum(a * eta - softplus(eta)))
    mu = conditional_means(params, state.A[0][i].astype(float)[None, :])[0]
    z = state.Z[i]
    total += float(
        np.sum(-0.5 * np.log(2.0 * math.pi * params.gamma) - (z - mu) ** 2 / (2.0 * params.gamma))
    )
    return total


def enumerate_configurations(widths):
    """All joint binary configurations across layers, as a list of per-layer arrays.

    Returns (configs, count) where configs[d] has shape (count, K^(d+1)).
    Only intended for sum(widths) small (exact tests and exact canonicalization).
    """
    total_bits = int(sum(widths))
    count = 1 << total_bits
    grid = ((np.arange(count)[:, None] >> np.arange(total_bits)) & 1).astype(np.int8)
    configs = []
    offset = 0
    for k in widths:
        configs.append(grid[:, offset:offset + k])
        offset += k
    return configs, count


def layer1_marginal(params):
    """Exact marginal probabilities of every A^(1) configuration (sum(K) <= ~20)."""
    dims = params.dims
    configs, count = enumerate_configurations(dims.widths)
    logp = np.zeros(count)
    a_top = configs[-1].astype(float)
    with np.errstate(divide="ignore"):
        lp = np.log(params.pi)
        lq = np.log1p(-params.pi)
    logp += a_top @ np.nan_to_num(lp, neginf=-1e300) + (1 - a_top) @ np.nan_to_num(
        lq, neginf=-1e300
    )
    for d in range(dims.depth, 1, -1):
        eta = linear_predictors(params.B[d - 1], configs[d - 1].astype(float))
        a = configs[d - 2].astype(float)
        logp += np.sum(a * eta - softplus(eta), axis=1)
    k1 = dims.widths[0]
    weights = np.zeros(1 << k1)
    codes = configs[0] @ (1 << np.arange(k1))
    np.add.at(weights, codes, np.exp(logp))
    alphas = ((np.arange(1 << k1)[:, None] >> np.arange(k1)) & 1).astype(float)
    return alphas, weights


def _canonical_from_moments(params, m, s2):
    if np.any(s2 <= 0):
        raise ModelError("degenerate variance: cannot canonicalize")
    s = np.sqrt(s2)
    out = params.copy()
    b1 = out.B[0]
    b1[:, 0] = (b1[:, 0] - m) / s
    b1[:, 1:] = b1[:, 1:] / s[:, None]
    out.gamma = out.gamma / s2
    return out


def canonicalize(params, latent_sample):
    """Affinely rescale the first layer so each Z_j has mean 0 and variance 1.

    Moments are estimated from the A^(1) draws in ``latent_sample`` (a large
    Monte Carlo sample from the fitted model, or the MAP latent state).
    """
    A1 = np.asarray(latent_sample.A[0], dtype=float)
    mu = conditional_means(params, A1)
    m = mu.mean(axis=0)
    s2 = params.gamma + mu.var(axis=0)
    return _canonical_from_moments(params, m, s2)


def canonicalize_exact(params):
    """Exact-moment canonicalization by enumeration; requires sum(K) <= 12."""
    if sum(params.dims.widths) > 12:
        raise ModelError("exact canonicalization limited to sum of widths <= 12")
    alphas, weights = layer1_marginal(params)
    weights = weights / weights.sum()
    mu = conditional_means(params, alphas)  # (n_alpha, J)
    m = weights @ mu
    s2 = params.gamma + weights @ mu**2 - m**2
    return _canonical_from_moments(params, m, s2)


# -- JSON serialization -------------------------------------------------------

SCHEMA_VERSION = 1


def params_to_dict(params, seed=None, canonical=False):
    return {
        "schema": SCHEMA_VERSION,
        "dims": {
            "depth": params.dims.depth,
            "widths": list(params.dims.widths),
            "observed_dim": params.dims.observed_dim,
        },
        "B": [b.tolist() for b in params.B],
        "gamma": params.gamma.tolist(),
        "pi": params.pi.tolist(),
        "meta": {"seed": seed, "canonical": bool(canonical)},
    }


def params_from_dict(doc):
    for key in ("schema", "dims", "B", "gamma", "pi", "meta"):
        if key not in doc:
            raise ModelError(f"model document missing field '{key}'")
    if doc["schema"] != SCHEMA_VERSION:
        raise ModelError(f"unsupported schema version {doc['schema']!r}")
    dims_doc = doc["dims"]
    for key in ("depth", "widths", "observed_dim"):
        if key not in dims_doc:
            raise ModelError(f"model document missing field 'dims.{key}'")
    dims = DdeDims(dims_doc["depth"], tuple(dims_doc["widths"]), dims_doc["observed_dim"])
    return DdeParams(dims, [np.asarray(b) for b in doc["B"]], doc["gamma"], doc["pi"])


def save_params(params, path, seed=None, canonical=False):
    with open(path, "w") as fh:
        json.dump(params_to_dict(params, seed=seed, canonical=canonical), fh, indent=1)
        fh.write("\n")


def load_params(path):
    with open(path) as fh:
        return params_from_dict(json.load(fh))
