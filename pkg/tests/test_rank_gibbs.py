import math

import numpy as np
import pytest
from scipy.stats import ks_2samp, norm

from ddecop._kernels import BACKEND, pyref
from ddecop.frame import DataTable, RankConsistencyError, build_rank_frame, is_rank_consistent
from ddecop.model import DdeDims, DdeParams, LatentState
from ddecop.rank_gibbs import gibbs_sweep_z, sample_truncated_normal


def truncated_mean(mu, var, lo, hi):
    """Analytic truncated-normal mean via the Mills-ratio formula (survival form)."""
    sd = math.sqrt(var)
    a = (lo - mu) / sd if lo != -np.inf else -np.inf
    b = (hi - mu) / sd if hi != np.inf else np.inf
    num = norm.pdf(a) - norm.pdf(b) if a != -np.inf else -norm.pdf(b)
    if b == np.inf:
        num = norm.pdf(a)
    mass = norm.sf(a) - norm.sf(b)
    return mu + sd * num / mass


def draws(mu, var, lo, hi, n, seed):
    rng = np.random.default_rng(seed)
    return np.array([sample_truncated_normal(mu, var, lo, hi, rng) for _ in range(n)])


def test_unconstrained_mean():
    z = draws(0.0, 1.0, -np.inf, np.inf, 100_000, 1)
    assert abs(z.mean()) < 3.0 / math.sqrt(100_000)


def test_half_normal_mean():
    z = draws(0.0, 1.0, 0.0, np.inf, 100_000, 2)
    assert np.all(z > 0)
    target = math.sqrt(2.0 / math.pi)
    se = z.std() / math.sqrt(z.size)
    assert abs(z.mean() - target) < 3 * se


def test_far_tail_interval():
    z = draws(0.0, 1.0, 8.0, 9.0, 100_000, 3)
    assert np.all((z > 8.0) & (z < 9.0))
    se = z.std() / math.sqrt(z.size)
    assert abs(z.mean() - truncated_mean(0.0, 1.0, 8.0, 9.0)) < 3 * se + 1e-6


def test_contract_violations():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        sample_truncated_normal(0.0, 1.0, 2.0, 1.0, rng)
    with pytest.raises(ValueError):
        sample_truncated_normal(0.0, -1.0, 0.0, 1.0, rng)
    assert sample_truncated_normal(0.0, 1.0, 3.0, 3.0, rng) == 3.0


def test_never_returns_bounds_under_extreme_truncation():
    # 40 sigma into the tail: naive inverse-CDF underflows; log-space must not
    for seed in range(5):
        z = draws(0.0, 1.0, 40.0, 41.0, 100, seed)
        assert np.all(np.isfinite(z)) and np.all((z > 40.0) & (z < 41.0))


def test_deterministic():
    assert np.array_equal(draws(0.5, 2.0, 0.0, 3.0, 10, 7), draws(0.5, 2.0, 0.0, 3.0, 10, 7))


def _one_column_setup(values, n_obs=1):
    table = DataTable(np.asarray(values, dtype=float).reshape(-1, n_obs), ["y"])
    frame = build_rank_frame(table)
    n = table.n
    dims = DdeDims(1, (1,), n_obs)
    params = DdeParams(
        dims, [np.zeros((n_obs, 2))], np.ones(n_obs), np.array([0.5])
    )
    z0 = np.argsort(np.argsort(table.values, axis=0), axis=0).astype(float)
    state = LatentState([np.zeros((n, 1), dtype=np.int8)], z0)
    return frame, state, params


def test_forced_ordering():
    frame, state, params = _one_column_setup([1.0, 2.0])
    for t in range(50):
        gibbs_sweep_z(frame, state, params, 1.0, np.random.default_rng(t))
        assert state.Z[0, 0] < state.Z[1, 0]


def test_ties_unconstrained():
    frame, state, params = _one_column_setup([1.0, 1.0])
    orders = set()
    for t in range(200):
        gibbs_sweep_z(frame, state, params, 1.0, np.random.default_rng(t))
        orders.add(state.Z[0, 0] < state.Z[1, 0])
    assert orders == {True, False}


def test_middle_cell_matches_rejection_oracle():
    frame, state, params = _one_column_setup([1.0, 2.0, 3.0])
    mids = []
    for t in range(10_000):
        gibbs_sweep_z(frame, state, params, 1.0, np.random.default_rng([5, t]))
        assert state.Z[0, 0] < state.Z[1, 0] < state.Z[2, 0]
        if t % 5 == 4:
            mids.append(state.Z[1, 0])
    rng = np.random.default_rng(77)
    accepted = []
    while len(accepted) < 2000:
        cand = rng.standard_normal((20_000, 3))
        keep = (cand[:, 0] < cand[:, 1]) & (cand[:, 1] < cand[:, 2])
        accepted.extend(cand[keep, 1].tolist())
    stat = ks_2samp(np.asarray(mids), np.asarray(accepted[:2000]))
    assert stat.pvalue > 0.01


def test_rank_consistency_is_sweep_invariant(rng):
    for trial in range(10):
        n = int(rng.integers(5, 60))
        n_cols = int(rng.integers(1, 5))
        values = rng.integers(0, 4, size=(n, n_cols)).astype(float)
        table = DataTable(values, [f"c{j}" for j in range(n_cols)])
        frame = build_rank_frame(table)
        dims = DdeDims(1, (1,), n_cols)
        params = DdeParams(
            dims,
            [np.column_stack([rng.normal(size=n_cols), rng.normal(size=n_cols)])],
            rng.uniform(0.5, 2.0, n_cols),
            np.array([0.5]),
        )
        z0 = np.argsort(np.argsort(values, axis=0), axis=0).astype(float)
        state = LatentState([rng.integers(0, 2, (n, 1)).astype(np.int8)], z0)
        for t in range(20):
            gibbs_sweep_z(frame, state, params, 0.8, np.random.default_rng([trial, t]))
            assert is_rank_consistent(frame, state.Z)


def test_tempering_scales_variance_exactly():
    frame, state, params = _one_column_setup([2.0, 1.0, 3.0, 1.0])
    tempered = state.copy()
    gibbs_sweep_z(frame, tempered, params, 0.25, np.random.default_rng(123))
    inflated = params.copy()
    inflated.gamma = params.gamma / 0.25
    plain = state.copy()
    gibbs_sweep_z(frame, plain, inflated, 1.0, np.random.default_rng(123))
    assert np.array_equal(tempered.Z, plain.Z)


def test_entry_contract_checked():
    frame, state, params = _one_column_setup([1.0, 2.0])
    state.Z[0, 0] = 10.0  # violates the ordering
    with pytest.raises(RankConsistencyError):
        gibbs_sweep_z(frame, state, params, 1.0, np.random.default_rng(0))


def test_worker_count_does_not_change_results():
    rng = np.random.default_rng(4)
    values = rng.integers(0, 5, size=(40, 6)).astype(float)
    table = DataTable(values, [f"c{j}" for j in range(6)])
    frame = build_rank_frame(table)
    dims = DdeDims(1, (2,), 6)
    params = DdeParams(
        dims, [rng.normal(size=(6, 3))], rng.uniform(0.5, 1.5, 6), np.array([0.4, 0.6])
    )
    z0 = np.argsort(np.argsort(values, axis=0), axis=0).astype(float)
    base = LatentState([rng.integers(0, 2, (40, 2)).astype(np.int8)], z0)
    serial = base.copy()
    threaded = base.copy()
    gibbs_sweep_z(frame, serial, params, 1.0, np.random.default_rng(9), workers=1)
    gibbs_sweep_z(frame, threaded, params, 1.0, np.random.default_rng(9), workers=3)
    assert np.array_equal(serial.Z, threaded.Z)


def test_backends_agree_bit_for_bit(rng):
    if BACKEND != "compiled":
        pytest.skip("compiled backend not built")
    from ddecop._kernels import _zcore

    for _ in range(500):
        mu = rng.normal() * 4
        sigma = abs(rng.normal()) + 0.05
        kind = rng.integers(4)
        if kind == 0:
            lo, hi = -np.inf, np.inf
        elif kind == 1:
            lo, hi = rng.normal() * 3, np.inf
        elif kind == 2:
            lo, hi = -np.inf, rng.normal() * 3
        else:
            lo = rng.normal() * 3
            hi = lo + abs(rng.normal()) + 1e-9
        u = rng.random()
        assert _zcore.tn_transform(u, mu, sigma, lo, hi) == pyref.tn_transform(
            u, mu, sigma, lo, hi
        )

    n = 300
    y = rng.integers(0, 3, n).astype(float)
    distinct, inv = np.unique(y, return_inverse=True)
    inv = inv.astype(np.int64)
    ptr = np.zeros(distinct.size + 1, dtype=np.int64)
    np.cumsum(np.bincount(inv, minlength=distinct.size), out=ptr[1:])
    rbg = np.argsort(inv, kind="stable").astype(np.int64)
    z = np.argsort(np.argsort(y)).astype(float)
    mu = rng.normal(size=n)
    u = rng.random(n)
    z1, z2 = z.copy(), z.copy()
    _zcore.sweep_column(z1, mu, 1.7, inv, ptr, rbg, u)
    pyref.sweep_column(z2, mu, 1.7, inv, ptr, rbg, u)
    assert np.array_equal(z1, z2)
