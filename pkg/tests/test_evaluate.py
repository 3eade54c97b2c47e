import itertools

import numpy as np
import pytest

from ddecop.evaluate import (
    AlignmentResult,
    BaggedTreesClassifier,
    ConstantProbabilityClassifier,
    align_permutations,
    entrywise_mse,
    graph_recovery,
    hungarian,
    orient_positive,
    pmse_evaluate,
    stratified_folds,
)
from ddecop.frame import DataTable


def brute_force_assignment(cost):
    k = cost.shape[0]
    best, best_perm = np.inf, None
    for perm in itertools.permutations(range(k)):
        total = sum(cost[i, perm[i]] for i in range(k))
        if total < best:
            best, best_perm = total, perm
    return best, best_perm


def test_hungarian_identity_favoring():
    cost = np.ones((3, 3)) - np.eye(3)
    assert np.array_equal(hungarian(cost), [0, 1, 2])


def test_hungarian_two_by_two():
    assert np.array_equal(hungarian(np.array([[0.0, 1.0], [1.0, 0.0]])), [0, 1])
    assert np.array_equal(hungarian(np.array([[1.0, 0.0], [0.0, 1.0]])), [1, 0])


def test_hungarian_matches_brute_force(rng):
    for k in range(2, 7):
        for _ in range(10):
            cost = rng.uniform(0, 10, size=(k, k))
            perm = hungarian(cost)
            total = sum(cost[i, perm[i]] for i in range(k))
            best, best_perm = brute_force_assignment(cost)
            assert abs(total - best) < 1e-10
            assert tuple(perm) == best_perm  # generic costs: unique optimum


def test_hungarian_rejects_bad_input():
    with pytest.raises(ValueError):
        hungarian(np.ones((2, 3)))
    with pytest.raises(ValueError):
        hungarian(np.array([[np.inf, 0.0], [0.0, 1.0]]))


def _toy_stack(rng, widths=(3, 2), n_obs=7):
    B1 = np.zeros((n_obs, 1 + widths[0]))
    B1[:, 0] = rng.normal(size=n_obs)
    for k in range(widths[0]):
        rows = rng.choice(n_obs, size=3, replace=False)
        B1[rows, 1 + k] = rng.uniform(1.0, 2.0, 3)
    B2 = np.zeros((widths[0], 1 + widths[1]))
    B2[:, 0] = rng.normal(size=widths[0])
    for k in range(widths[1]):
        B2[rng.choice(widths[0], 2, replace=False), 1 + k] = rng.uniform(1.0, 2.0, 2)
    return [B1, B2]


def test_alignment_recovers_permutation(rng):
    true_B = _toy_stack(rng)
    perm = np.array([2, 0, 1])
    est_B = [b.copy() for b in true_B]
    est_B[0][:, 1:] = true_B[0][:, 1:][:, perm]
    est_B[1] = true_B[1][perm, :]
    out = align_permutations(true_B, est_B)
    assert not out.padded
    assert entrywise_mse(out.true_aligned, out.est_aligned) == [0.0, 0.0]
    assert graph_recovery(out.true_aligned, out.est_aligned) == [1.0, 1.0]


def test_alignment_identity_when_equal(rng):
    true_B = _toy_stack(rng)
    out = align_permutations(true_B, [b.copy() for b in true_B])
    for perm in out.permutations:
        assert np.array_equal(perm, np.arange(perm.size))


def test_alignment_resolves_sign_flips(rng):
    true_B = _toy_stack(rng)
    est_B = [b.copy() for b in true_B]
    # flip latent 1 of layer 1: negate its column, adjust intercepts, negate row
    est_B[0][:, 0] += est_B[0][:, 2]
    est_B[0][:, 2] = -est_B[0][:, 2]
    est_B[1][1, :] = -est_B[1][1, :]
    out = align_permutations(true_B, est_B)
    assert entrywise_mse(out.true_aligned, out.est_aligned)[0] < 1e-20
    assert graph_recovery(out.true_aligned, out.est_aligned) == [1.0, 1.0]


def test_alignment_pads_width_mismatch(rng):
    true_B = _toy_stack(rng)
    est_B = [true_B[0][:, :3].copy(), true_B[1][:2, :].copy()]
    out = align_permutations(true_B, est_B)
    assert out.padded
    assert out.est_aligned[0].shape == out.true_aligned[0].shape
    assert out.est_aligned[1].shape == out.true_aligned[1].shape


def test_alignment_never_increases_cost(rng):
    for _ in range(10):
        true_B = _toy_stack(rng)
        est_B = [b + rng.normal(scale=0.5, size=b.shape) for b in true_B]
        out = align_permutations(true_B, est_B)
        oriented_true = orient_positive([b.copy() for b in true_B])
        oriented_est = orient_positive([b.copy() for b in est_B])
        for d in range(2):
            identity_cost = np.sum((oriented_true[d][:, 1:] - oriented_est[d][:, 1:]) ** 2)
            aligned_cost = np.sum(
                (out.true_aligned[d][:, 1:] - out.est_aligned[d][:, 1:]) ** 2
            )
            assert aligned_cost <= identity_cost + 1e-9


def test_alignment_rejects_incomparable_shapes(rng):
    true_B = _toy_stack(rng)
    bad = [true_B[0][:5, :], true_B[1]]
    with pytest.raises(ValueError):
        align_permutations(true_B, bad)


def test_graph_recovery_values():
    t = [np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 2.0]])]
    assert graph_recovery(t, [t[0].copy()]) == [1.0]
    dense = [np.array([[0.0, 1.0, 1.0], [0.0, 1.0, 1.0]])]
    zero = [np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 0.0]])]
    assert graph_recovery(zero, dense) == [0.0]
    half = [np.array([[0.0, 1.0, 0.0], [0.0, 1.0, 0.0]])]
    other = [np.array([[0.0, 1.0, 1.0], [0.0, 0.0, 1.0]])]
    assert graph_recovery(half, other) == [0.25]


def test_entrywise_mse_values(rng):
    t = [rng.normal(size=(3, 4))]
    assert entrywise_mse(t, [t[0].copy()]) == [0.0]
    shifted = [t[0] + 0.1]
    assert abs(entrywise_mse(t, shifted)[0] - 0.01) < 1e-12
    assert entrywise_mse(t, shifted) == entrywise_mse(shifted, t)


def test_metrics_invariant_under_common_permutation(rng):
    t = [rng.normal(size=(4, 4))]
    e = [rng.normal(size=(4, 4))]
    perm = [0, 2, 1]
    tp = [t[0].copy()]
    ep = [e[0].copy()]
    tp[0][:, 1:] = t[0][:, 1:][:, perm]
    ep[0][:, 1:] = e[0][:, 1:][:, perm]
    assert graph_recovery(t, e) == graph_recovery(tp, ep)
    assert np.allclose(entrywise_mse(t, e), entrywise_mse(tp, ep), rtol=0, atol=1e-14)


def test_pmse_constant_classifier_is_zero(rng):
    real = DataTable(rng.normal(size=(40, 3)), list("abc"))
    syn = DataTable(rng.normal(size=(40, 3)), list("abc"))
    score = pmse_evaluate(
        real, syn, rng=rng, classifier_factory=lambda r: ConstantProbabilityClassifier(0.5)
    )
    assert score == 0.0


def test_pmse_separable_near_quarter(rng):
    real = DataTable(np.zeros((60, 2)), ["a", "b"])
    syn = DataTable(np.full((60, 2), 9.0), ["a", "b"])
    score = pmse_evaluate(real, syn, rng=np.random.default_rng(0))
    assert score > 0.2


def test_pmse_bounds_and_minimum_rows(rng):
    real = DataTable(rng.normal(size=(30, 2)), ["a", "b"])
    syn = DataTable(rng.normal(size=(30, 2)), ["a", "b"])
    score = pmse_evaluate(real, syn, rng=np.random.default_rng(1))
    assert 0.0 <= score <= 0.25
    with pytest.raises(ValueError):
        pmse_evaluate(DataTable(rng.normal(size=(5, 2)), ["a", "b"]), syn)
    with pytest.raises(ValueError):
        pmse_evaluate(real, DataTable(rng.normal(size=(30, 3)), list("abc")))


def test_pmse_label_swap_symmetry(rng):
    real = DataTable(rng.normal(size=(80, 3)), list("abc"))
    syn = DataTable(rng.normal(size=(80, 3)) + 0.3, list("abc"))
    forward = [
        pmse_evaluate(real, syn, rng=np.random.default_rng([2, s])) for s in range(10)
    ]
    backward = [
        pmse_evaluate(syn, real, rng=np.random.default_rng([3, s])) for s in range(10)
    ]
    se = np.std(forward) / np.sqrt(len(forward)) + np.std(backward) / np.sqrt(len(backward))
    assert abs(np.mean(forward) - np.mean(backward)) < 2 * se + 1e-3


def test_stratified_folds_balanced(rng):
    labels = np.concatenate([np.zeros(50), np.ones(50)])
    folds = stratified_folds(labels, 5, rng)
    assert sorted(np.concatenate(folds).tolist()) == list(range(100))
    for held in folds:
        assert abs(labels[held].mean() - 0.5) < 1e-12


def test_bagged_trees_learn_separable(rng):
    X = np.vstack([rng.normal(size=(100, 2)), rng.normal(size=(100, 2)) + 4.0])
    y = np.concatenate([np.zeros(100), np.ones(100)])
    clf = BaggedTreesClassifier(np.random.default_rng(0), n_trees=20).fit(X, y)
    p = clf.predict_proba(X)
    assert np.mean((p > 0.5) == y) > 0.95
