"""Monte Carlo EM fit loop: tempered E-steps, penalized M-steps, width tracking.

Each iteration resamples (Z, A) under the current parameters, refreshes the
shrinkage state of every layer, then solves the row-wise penalized
regressions (logistic for the deep layers, Gaussian for the first), applies
thresholding and hierarchical gating, anneals the temperature, and monitors
relative Frobenius changes for convergence.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .csp import (
    allocate_c,
    default_lambda1,
    effective_width,
    initial_csp_state,
    penalty_weights,
    sample_slab_rates,
    update_sticks,
)
from .frame import RankFrame
from .latent import exact_gibbs_sweep, mean_field_sweep
from .model import DdeDims, DdeParams, LatentState, conditional_means
from .rank_gibbs import gibbs_sweep_z
from .solvers import solve_weighted_l1_gaussian, solve_weighted_l1_logistic
from .spectral import initial_state

VARIANTS = ("mean-field", "exact-gibbs")


class FitError(RuntimeError):
    pass


@dataclass
class FitConfig:
    depth: int = 2
    max_iters: int = 200
    burn_in: int = 5
    tau0: float = 0.9
    tau_increment: float = 0.01
    xi: float | None = None  # None: max(0.3, 3 * n^-0.3) at fit time
    conv_window: int = 10
    conv_tol: float = 1e-3
    monte_carlo_count: int = 1
    solver_tol: float = 1e-8
    seed: int = 0
    variant: str = "mean-field"
    lambda1: tuple | None = None  # None: per-layer defaults from J and depth
    workers: int = 1

    def __post_init__(self):
        if not 0.0 < self.tau0 <= 1.0:
            raise ValueError("tau0 must be in (0, 1]")
        if self.xi is not None and self.xi < 0:
            raise ValueError("xi must be nonnegative")
        if self.monte_carlo_count < 1:
            raise ValueError("monte_carlo_count must be >= 1")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")


@dataclass
class FitResult:
    params: DdeParams
    csp: list
    latent: LatentState  # majority-vote binary estimates plus the final Z draw
    effective_widths: tuple
    trace: dict
    iterations_run: int
    converged: bool


def default_threshold(n):
    return max(0.3, 3.0 * n ** (-0.3))


def update_pi(q):
    """Top-layer probabilities: column means of the draws, clamped off {0, 1}."""
    q = np.asarray(q, dtype=float)
    return np.clip(q.mean(axis=0), 1e-6, 1.0 - 1e-6)


def update_gamma(residual_ss, n, mc_count):
    """Conditional MAP residual variance under the unit-rate Gamma prior."""
    if residual_ss < 0:
        raise ValueError("residual sum of squares must be nonnegative")
    return (1.0 + 0.5 * residual_ss) / (1.0 + 0.5 * n * mc_count + 1.0)


def threshold_matrix(B, xi):
    """Zero non-intercept entries with magnitude strictly below xi."""
    if xi < 0:
        raise ValueError("xi must be nonnegative")
    out = B.copy()
    body = out[:, 1:]
    body[np.abs(body) < xi] = 0.0
    return out


def apply_gating(c_layer, B_next):
    """Zero row k of the next-deeper matrix for every inactive column k."""
    c_layer = np.asarray(c_layer)
    out = B_next.copy()
    inactive = c_layer <= np.arange(1, c_layer.shape[0] + 1)
    out[inactive, :] = 0.0
    return out


def temperature_step(tau, t, burn, increment=0.01):
    """Anneal: tau + increment*((t - burn) - 1) after burn-in, capped at 1."""
    if t <= burn:
        return tau
    return min(1.0, tau + increment * ((t - burn) - 1))


def convergence_check(rel_changes_per_layer, window, tol, tau):
    """Converged when every layer's recent relative changes have settled and tau == 1."""
    if window < 2:
        raise ValueError("window must be >= 2")
    if tau < 1.0:
        return False
    for history in rel_changes_per_layer:
        if len(history) < window:
            return False
        if float(np.std(np.asarray(history[-window:]))) >= tol:
            return False
    return True


def _check_finite(arr, iteration, block):
    if not np.all(np.isfinite(arr)):
        raise FitError(f"non-finite values at iteration {iteration} in {block}")


def _rng_for(seed, tag, *rest):
    return np.random.default_rng([seed, tag, *rest])


_TAG_Z, _TAG_A, _TAG_CSP = 1, 2, 3


def fit(frame, config, init=None):
    """MAP-estimate a DDE copula on a RankFrame by coordinate-ascent Monte Carlo EM.

    ``init`` may carry (params, latent_state); by default the spectral and
    double-SVD initializers provide it. Returns a FitResult whose latent state
    holds majority-vote binary estimates and the final Z draw.
    """
    if not isinstance(frame, RankFrame):
        raise TypeError("fit expects a RankFrame")
    n, n_obs = frame.n, frame.n_cols
    if init is None:
        dims = DdeDims.maximal(n_obs, config.depth)
        params, state = initial_state(frame.table, dims, _rng_for(config.seed, 0))
    else:
        params, state = init
        params = params.copy()
        state = state.copy()
        dims = params.dims
    if n < 3 * dims.widths[0]:
        warnings.warn(
            f"n={n} is below 3*K_max={3 * dims.widths[0]}; initialization quality degrades"
        )
    lambda1 = config.lambda1 or default_lambda1(n_obs, dims.depth)
    if len(lambda1) != dims.depth:
        raise ValueError("lambda1 must provide one spike scale per layer")
    csp = [initial_csp_state(dims.widths[d], lambda1[d]) for d in range(dims.depth)]
    xi = config.xi if config.xi is not None else default_threshold(n)
    tau = config.tau0
    mc_count = config.monte_carlo_count
    depth = dims.depth

    rel_changes = [[] for _ in range(depth)]
    trace = {
        "tau": [],
        "rel_change": rel_changes,
        "k_star": [[] for _ in range(depth)],
        "gauss_loglik": [],
    }
    converged = False
    iterations = 0

    for t in range(config.max_iters):
        b_before = [b.copy() for b in params.B]

        # E-step: C chained draws of (Z, A), then the shrinkage state per layer.
        draws_A = []
        draws_Z = []
        for rep in range(mc_count):
            gibbs_sweep_z(
                frame, state, params, tau, _rng_for(config.seed, _TAG_Z, t, rep),
                workers=config.workers,
            )
            if config.variant == "mean-field":
                state.A = mean_field_sweep(
                    state.A, state.Z, params, tau, _rng_for(config.seed, _TAG_A, t, rep)
                )
            else:
                state.A = exact_gibbs_sweep(
                    state.A, state.Z, params, _rng_for(config.seed, _TAG_A, t, rep)
                )
            draws_A.append([a.copy() for a in state.A])
            draws_Z.append(state.Z.copy())

        for d in range(depth, 0, -1):  # deepest first: uses layer d-1's current widths
            layer = csp[d - 1]
            if d == 1:
                active_rows = np.arange(n_obs)
            else:
                active_rows = np.nonzero(csp[d - 2].active_columns())[0]
            rng_csp = _rng_for(config.seed, _TAG_CSP, t, d)
            layer.c = allocate_c(layer, params.B[d - 1], active_rows)
            layer.v, layer.omega = update_sticks(layer.c, layer.alpha, rng_csp)
            layer.lambda0 = sample_slab_rates(
                layer, params.B[d - 1], len(active_rows), rng_csp, active_rows
            )

        # M-step: pi, deep logistic layers, Gaussian layer, variances.
        q = np.mean([a[depth - 1] for a in draws_A], axis=0)
        params.pi = update_pi(q)
        _check_finite(params.pi, t, "pi")

        for d in range(depth, 1, -1):
            _solve_logistic_layer(params, csp, draws_A, d, tau, config, t)

        _solve_gaussian_layer(params, csp, draws_A, draws_Z, tau, config, t)

        for d in range(1, depth + 1):
            params.B[d - 1] = threshold_matrix(params.B[d - 1], xi)
        for d in range(1, depth):
            params.B[d] = apply_gating(csp[d - 1].c, params.B[d])

        widths = tuple(effective_width(layer.c) for layer in csp)

        # Majority-vote point estimates seed the next sweep (ties keep the old value).
        new_A = []
        for d in range(depth):
            mean_d = np.mean([a[d] for a in draws_A], axis=0)
            prev = state.A[d]
            new_A.append(
                np.where(mean_d > 0.5, 1, np.where(mean_d < 0.5, 0, prev)).astype(np.int8)
            )
        state.A = new_A

        mu = conditional_means(params, state.A[0].astype(float))
        gauss_ll = float(
            np.mean(
                -0.5 * np.log(2.0 * np.pi * params.gamma)
                - (state.Z - mu) ** 2 / (2.0 * params.gamma)
            )
        )

        trace["tau"].append(tau)
        trace["gauss_loglik"].append(gauss_ll)
        for d in range(depth):
            prev = b_before[d]
            num = float(np.linalg.norm(params.B[d] - prev))
            den = float(np.linalg.norm(prev)) + 1e-8
            rel_changes[d].append(num / den)
            trace["k_star"][d].append(widths[d])

        iterations = t + 1
        tau = temperature_step(tau, t + 1, config.burn_in, config.tau_increment)
        if convergence_check(rel_changes, config.conv_window, config.conv_tol, tau):
            converged = True
            break

    return FitResult(
        params=params,
        csp=[layer.copy() for layer in csp],
        latent=state,
        effective_widths=tuple(effective_width(layer.c) for layer in csp),
        trace=trace,
        iterations_run=iterations,
        converged=converged,
    )


def _stack_design(draws_A, d, active_cols):
    """Stacked intercept-plus-active-columns design for layer d solves."""
    blocks = [
        np.hstack([np.ones((a[d - 1].shape[0], 1)), a[d - 1][:, active_cols].astype(float)])
        for a in draws_A
    ]
    return np.vstack(blocks)


def _solve_logistic_layer(params, csp, draws_A, d, tau, config, t):
    """Rows of B^(d) (d >= 2) by weighted-l1 logistic regressions on layer-d draws."""
    layer = csp[d - 1]
    active_cols = np.nonzero(layer.active_columns())[0]
    child_active = csp[d - 2].active_columns()
    B_d = params.B[d - 1]
    new_B = np.zeros_like(B_d)
    design = _stack_design(draws_A, d, active_cols)
    weights = penalty_weights(layer, 1)[0][np.concatenate(([0], 1 + active_cols))]
    for r in range(B_d.shape[0]):
        if not child_active[r]:
            continue  # gated to zero below
        response = np.concatenate([a[d - 2][:, r] for a in draws_A]).astype(float)
        start = np.concatenate(([B_d[r, 0]], B_d[r, 1 + active_cols]))
        fitted = solve_weighted_l1_logistic(
            design, response, weights, tau, start=start, tol=config.solver_tol
        )
        new_B[r, 0] = fitted.coef[0]
        new_B[r, 1 + active_cols] = fitted.coef[1:]
    params.B[d - 1] = new_B
    _check_finite(new_B, t, f"B^({d})")


def _solve_gaussian_layer(params, csp, draws_A, draws_Z, tau, config, t):
    """Rows of B^(1) by weighted-l1 Gaussian regressions, then the gamma updates."""
    layer = csp[0]
    active_cols = np.nonzero(layer.active_columns())[0]
    design = _stack_design(draws_A, 1, active_cols)
    responses = np.vstack(draws_Z)
    mc_count = len(draws_Z)
    weights = penalty_weights(layer, 1)[0][np.concatenate(([0], 1 + active_cols))]
    B_1 = params.B[0]
    new_B = np.zeros_like(B_1)
    n = draws_Z[0].shape[0]
    new_gamma = np.empty_like(params.gamma)
    for j in range(B_1.shape[0]):
        start = np.concatenate(([B_1[j, 0]], B_1[j, 1 + active_cols]))
        coef = solve_weighted_l1_gaussian(
            design, responses[:, j], weights, params.gamma[j], tau,
            start=start, tol=config.solver_tol,
        )
        new_B[j, 0] = coef[0]
        new_B[j, 1 + active_cols] = coef[1:]
        resid = responses[:, j] - design @ coef
        new_gamma[j] = update_gamma(float(resid @ resid), n, mc_count)
    params.B[0] = new_B
    params.gamma = new_gamma
    _check_finite(new_B, t, "B^(1)")
    _check_finite(new_gamma, t, "gamma")
