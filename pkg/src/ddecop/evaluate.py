"""Permutation-aligned parameter metrics and propensity-score utility scoring.

Latent coordinates are only identified up to within-layer permutation (and
0/1 relabeling, which shows up as a column sign flip). Alignment therefore
orients every column to a positive sum — a model-equivalent transformation —
then matches columns bottom-up with an assignment solver before computing
sparsity-recovery and entrywise-error metrics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .frame import DataTable


def hungarian(cost):
    """Optimal assignment for a square cost matrix; perm[row] = column, O(k^3)."""
    cost = np.asarray(cost, dtype=float)
    k = cost.shape[0]
    if cost.ndim != 2 or cost.shape != (k, k):
        raise ValueError("cost matrix must be square")
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix must be finite")
    u = np.zeros(k + 1)
    v = np.zeros(k + 1)
    match = np.zeros(k + 1, dtype=np.int64)  # match[j]: row assigned to column j
    way = np.zeros(k + 1, dtype=np.int64)
    for i in range(1, k + 1):
        match[0] = i
        j0 = 0
        minv = np.full(k + 1, np.inf)
        used = np.zeros(k + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = match[j0]
            delta = np.inf
            j1 = 0
            for j in range(1, k + 1):
                if used[j]:
                    continue
                cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(k + 1):
                if used[j]:
                    u[match[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1
    perm = np.empty(k, dtype=np.int64)
    for j in range(1, k + 1):
        perm[match[j] - 1] = j - 1
    return perm


@dataclass
class AlignmentResult:
    est_aligned: list
    true_aligned: list
    permutations: list
    padded: bool


def _pad_layers(true_B, est_B):
    """Zero-pad both weight stacks to common per-layer widths."""
    true_p = [np.asarray(b, dtype=float).copy() for b in true_B]
    est_p = [np.asarray(b, dtype=float).copy() for b in est_B]
    if len(true_p) != len(est_p):
        raise ValueError("layer-count mismatch between truth and estimate")
    if true_p[0].shape[0] != est_p[0].shape[0]:
        raise ValueError("first-layer row counts differ; matrices are not comparable")
    padded = False
    depth = len(true_p)
    for d in range(depth):
        width = max(true_p[d].shape[1], est_p[d].shape[1]) - 1
        if true_p[d].shape[1] != est_p[d].shape[1]:
            padded = True
        for stack in (true_p, est_p):
            short = width + 1 - stack[d].shape[1]
            if short > 0:
                stack[d] = np.hstack([stack[d], np.zeros((stack[d].shape[0], short))])
            if d + 1 < depth and stack[d + 1].shape[0] < width:
                grow = width - stack[d + 1].shape[0]
                stack[d + 1] = np.vstack(
                    [stack[d + 1], np.zeros((grow, stack[d + 1].shape[1]))]
                )
    return true_p, est_p, padded


def orient_positive(B_stack):
    """Flip latent coordinates so every non-intercept column sums positive.

    Flipping a coordinate negates its column (with an intercept adjustment)
    and negates its row in the next-deeper matrix; the model is unchanged.
    """
    out = [b.copy() for b in B_stack]
    for d in range(len(out)):
        B = out[d]
        for k in range(B.shape[1] - 1):
            if B[:, 1 + k].sum() < 0:
                B[:, 0] += B[:, 1 + k]
                B[:, 1 + k] = -B[:, 1 + k]
                if d + 1 < len(out):
                    out[d + 1][k, :] = -out[d + 1][k, :]
    return out


def align_permutations(true_B, est_B):
    """Match estimated latent coordinates to the truth, bottom-up per layer.

    Costs are squared column distances between (oriented, padded) matrices;
    the chosen permutation of layer-d columns also permutes layer d+1 rows.
    """
    true_p, est_p, padded = _pad_layers(true_B, est_B)
    true_o = orient_positive(true_p)
    est_o = orient_positive(est_p)
    perms = []
    for d in range(len(true_o)):
        T = true_o[d][:, 1:]
        E = est_o[d][:, 1:]
        cost = ((T[:, :, None] - E[:, None, :]) ** 2).sum(axis=0)
        perm = hungarian(cost)
        aligned = est_o[d].copy()
        aligned[:, 1:] = est_o[d][:, 1:][:, perm]
        est_o[d] = aligned
        if d + 1 < len(est_o):
            est_o[d + 1] = est_o[d + 1][perm, :]
        perms.append(perm)
    return AlignmentResult(est_o, true_o, perms, padded)


def graph_recovery(true_aligned, est_aligned):
    """Per-layer fraction of non-intercept entries with matching zero pattern."""
    out = []
    for T, E in zip(true_aligned, est_aligned):
        out.append(float(np.mean((T[:, 1:] != 0) == (E[:, 1:] != 0))))
    return out


def entrywise_mse(true_aligned, est_aligned):
    """Per-layer mean squared difference over non-intercept entries."""
    out = []
    for T, E in zip(true_aligned, est_aligned):
        out.append(float(np.mean((T[:, 1:] - E[:, 1:]) ** 2)))
    return out


# -- propensity-score utility ---------------------------------------------------

class ConstantProbabilityClassifier:
    """Stub classifier emitting a fixed probability (testing hook)."""

    def __init__(self, p=0.5):
        self.p = p

    def fit(self, X, y):
        return self

    def predict_proba(self, X):
        return np.full(X.shape[0], self.p)


class BaggedTreesClassifier:
    """Bagged depth-limited binary decision trees with Gini splits.

    Features are quantile-binned once per fit; each tree grows greedily on a
    bootstrap resample. Self-contained and deterministic given the rng.
    """

    def __init__(self, rng, n_trees=50, max_depth=6, max_bins=32):
        self.rng = rng
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.max_bins = max_bins
        self.cuts = None
        self.trees = None

    def _bin(self, X):
        binned = np.empty(X.shape, dtype=np.int64)
        for f in range(X.shape[1]):
            binned[:, f] = np.searchsorted(self.cuts[f], X[:, f], side="right")
        return binned

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        self.cuts = []
        for f in range(X.shape[1]):
            qs = np.quantile(X[:, f], np.linspace(0, 1, self.max_bins + 1)[1:-1])
            self.cuts.append(np.unique(qs))
        binned = self._bin(X)
        self.trees = []
        n = X.shape[0]
        for _ in range(self.n_trees):
            boot = self.rng.integers(0, n, n)
            self.trees.append(self._grow(binned[boot], y[boot]))
        return self

    def _grow(self, Xb, y):
        nodes = []  # per node: [feature, cut_bin, left, right, prob]; feature -1 = leaf
        stack = [(np.arange(Xb.shape[0]), 0, None, None)]
        while stack:
            idx, depth, parent, side = stack.pop()
            node_id = len(nodes)
            if parent is not None:
                nodes[parent][2 if side == "l" else 3] = node_id
            prob = float(y[idx].mean())
            nodes.append([-1, -1, -1, -1, prob])
            if depth >= self.max_depth or prob in (0.0, 1.0) or idx.size < 2:
                continue
            split = self._best_split(Xb[idx], y[idx])
            if split is None:
                continue
            f, cut = split
            go_left = Xb[idx, f] <= cut
            nodes[node_id][0] = f
            nodes[node_id][1] = cut
            stack.append((idx[go_left], depth + 1, node_id, "l"))
            stack.append((idx[~go_left], depth + 1, node_id, "r"))
        cols = list(zip(*nodes))
        return (
            np.asarray(cols[0], dtype=np.int64),
            np.asarray(cols[1], dtype=np.int64),
            np.asarray(cols[2], dtype=np.int64),
            np.asarray(cols[3], dtype=np.int64),
            np.asarray(cols[4], dtype=float),
        )

    def _best_split(self, Xb, y):
        n = y.shape[0]
        total_ones = y.sum()
        best = None
        best_impurity = _gini(total_ones, n)
        for f in range(Xb.shape[1]):
            col = Xb[:, f]
            n_bins = int(col.max()) + 1
            if n_bins < 2:
                continue
            counts = np.bincount(col, minlength=n_bins).astype(float)
            ones = np.bincount(col, weights=y, minlength=n_bins)
            n_left = np.cumsum(counts)[:-1]
            ones_left = np.cumsum(ones)[:-1]
            n_right = n - n_left
            ones_right = total_ones - ones_left
            valid = (n_left > 0) & (n_right > 0)
            if not np.any(valid):
                continue
            impurity = (
                n_left * _gini_vec(ones_left, n_left)
                + n_right * _gini_vec(ones_right, n_right)
            ) / n
            impurity[~valid] = np.inf
            cut = int(np.argmin(impurity))
            if impurity[cut] < best_impurity - 1e-12:
                best_impurity = impurity[cut]
                best = (f, cut)
        return best

    def predict_proba(self, X):
        binned = self._bin(np.asarray(X, dtype=float))
        n = binned.shape[0]
        out = np.zeros(n)
        for feat, cut, left, right, prob in self.trees:
            node = np.zeros(n, dtype=np.int64)
            for _ in range(self.max_depth + 1):
                f = feat[node]
                internal = np.nonzero(f >= 0)[0]
                if internal.size == 0:
                    break
                at = node[internal]
                go_left = binned[internal, f[internal]] <= cut[at]
                node[internal] = np.where(go_left, left[at], right[at])
            out += prob[node]
        return out / len(self.trees)


def _gini(ones, total):
    p = ones / total
    return 2.0 * p * (1.0 - p)


def _gini_vec(ones, totals):
    with np.errstate(invalid="ignore", divide="ignore"):
        p = np.where(totals > 0, ones / totals, 0.0)
    return 2.0 * p * (1.0 - p)


def stratified_folds(labels, folds, rng):
    """Index lists of `folds` class-balanced held-out sets."""
    parts = [[] for _ in range(folds)]
    for cls in (0, 1):
        idx = np.nonzero(labels == cls)[0]
        idx = idx[rng.permutation(idx.shape[0])]
        for f, chunk in enumerate(np.array_split(idx, folds)):
            parts[f].append(chunk)
    return [np.sort(np.concatenate(p)) for p in parts]


def pmse_evaluate(real, synthetic, folds=5, rng=None, classifier_factory=None):
    """Propensity-score mean squared error between a real and a synthetic table.

    Stacks the tables with labels {0: real, 1: synthetic}, runs stratified
    cross-validation, and averages mean (p_hat - 0.5)^2 over held-out folds.
    """
    real_values = real.values if isinstance(real, DataTable) else np.asarray(real, float)
    syn_values = (
        synthetic.values if isinstance(synthetic, DataTable) else np.asarray(synthetic, float)
    )
    if real_values.shape[1] != syn_values.shape[1]:
        raise ValueError("real and synthetic tables must have equal column counts")
    if min(real_values.shape[0], syn_values.shape[0]) < 10:
        raise ValueError("need at least 10 rows per class")
    if rng is None:
        rng = np.random.default_rng(0)
    if classifier_factory is None:
        classifier_factory = lambda r: BaggedTreesClassifier(r)  # noqa: E731
    X = np.vstack([real_values, syn_values])
    y = np.concatenate([np.zeros(real_values.shape[0]), np.ones(syn_values.shape[0])])
    scores = []
    for held in stratified_folds(y, folds, rng):
        mask = np.zeros(X.shape[0], dtype=bool)
        mask[held] = True
        clf = classifier_factory(rng).fit(X[~mask], y[~mask])
        p_hat = clf.predict_proba(X[mask])
        scores.append(float(np.mean((p_hat - 0.5) ** 2)))
    return float(np.mean(scores))
