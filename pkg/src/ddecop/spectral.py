"""Starting values: spectral rank-consistent Z and layer-wise double-SVD params.

The Z initializer clusters each variable against its spectral nearest
neighbor, simulates from the fitted bivariate Gaussian mixture, and matches
order statistics so the result lies in the rank-consistent set. The double
SVD then peels binary layers off Z by median-binarized principal scores and
fits each layer's weights by unpenalized regressions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import DdeParams, LatentState
from .solvers import solve_weighted_l1_logistic

KMEANS_MAX_K = 8
KMEANS_ITERS = 50
GAMMA_FLOOR = 1e-6


def truncated_svd(matrix, rank):
    """Best rank-k factors (U_k, s_k, V_k); V_k holds right vectors as columns."""
    matrix = np.asarray(matrix, dtype=float)
    if rank > min(matrix.shape):
        raise ValueError("rank exceeds min(n, J)")
    u, s, vt = np.linalg.svd(matrix, full_matrices=False)
    return u[:, :rank], s[:rank], vt[:rank].T


def select_energy_rank(singular_values, threshold=0.8):
    """Smallest k whose leading squared singular values hold >= threshold energy."""
    s = np.asarray(singular_values, dtype=float)
    total = float(np.sum(s**2))
    if total <= 0.0:
        raise ValueError("all-zero spectrum")
    ratios = np.cumsum(s**2) / total
    return int(np.searchsorted(ratios, threshold - 1e-12) + 1)


def kmeans(points, k, rng, n_iter=KMEANS_ITERS):
    """Lloyd iterations with greedy ++-style seeding; returns (centers, labels, weights)."""
    pts = np.asarray(points, dtype=float)
    m = pts.shape[0]
    if k > m:
        raise ValueError("more clusters than points")
    centers = np.empty((k, pts.shape[1]))
    centers[0] = pts[rng.integers(m)]
    d2 = np.sum((pts - centers[0]) ** 2, axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            centers[c] = pts[rng.integers(m)]
        else:
            centers[c] = pts[rng.choice(m, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((pts - centers[c]) ** 2, axis=1))
    labels = np.zeros(m, dtype=np.int64)
    for _ in range(n_iter):
        dists = np.sum((pts[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        labels = np.argmin(dists, axis=1)
        moved = False
        for c in range(k):
            members = labels == c
            if not np.any(members):
                far = int(np.argmax(dists[np.arange(m), labels]))
                centers[c] = pts[far]
                labels[far] = c
                moved = True
                continue
            new_center = pts[members].mean(axis=0)
            if not np.allclose(new_center, centers[c]):
                moved = True
            centers[c] = new_center
        if not moved:
            break
    weights = np.bincount(labels, minlength=k) / m
    return centers, labels, weights


def inertia(points, centers, labels):
    return float(np.sum((points - centers[labels]) ** 2))


def elbow_select(inertias):
    """Elbow pick over inertias for k = 1..k_max.

    The k with the largest positive second difference wins; with flat
    curvature, the smallest k improving on the k=1 baseline by more than 10%
    wins; failing that, k=1.
    """
    inertias = np.asarray(inertias, dtype=float)
    k_max = inertias.shape[0]
    if k_max < 3:
        return k_max
    second = inertias[:-2] - 2.0 * inertias[1:-1] + inertias[2:]  # index i -> k = i + 2
    improving = np.nonzero(inertias[1:-1] < 0.9 * inertias[0])[0]
    if improving.size == 0:
        return 1
    if np.max(second) > 0.0:
        return int(np.argmax(second)) + 2
    return int(improving[0]) + 2


@dataclass
class SpectralEmbedding:
    singular_values: np.ndarray  # nonincreasing
    vectors: np.ndarray  # right singular vectors, one row per variable
    distances: np.ndarray  # squared distances between variable embeddings
    rank: int  # smallest rank holding >= 80% of squared-singular-value energy


def spectral_embedding(values):
    """Variable embedding from the table's SVD, with pairwise squared distances.

    Numerically-zero singular directions are dropped: their vectors are an
    arbitrary null-space basis and would corrupt the distances.
    """
    values = np.asarray(values, dtype=float)
    u, s, vt = np.linalg.svd(values, full_matrices=False)
    keep = s > s[0] * max(values.shape) * np.finfo(float).eps if s[0] > 0 else s > -1
    V = vt[keep].T
    sq = np.sum(V**2, axis=1)
    D = sq[:, None] + sq[None, :] - 2.0 * (V @ V.T)
    np.fill_diagonal(D, 0.0)
    return SpectralEmbedding(s, V, np.maximum(D, 0.0), select_energy_rank(s))


def spectral_init_z(table, rng):
    """Rank-consistent latent Gaussian start from spectral pairwise clustering."""
    Y = table.values
    n, n_cols = Y.shape
    u, s, vt = np.linalg.svd(Y, full_matrices=False)
    embedding = spectral_embedding(Y)
    D = embedding.distances
    k = embedding.rank
    Y_star = (u[:, :k] * s[:k]) @ vt[:k]
    streams = rng.spawn(n_cols)
    Z = np.empty_like(Y)
    for j in range(n_cols):
        crng = streams[j]
        col = Y[:, j]
        order = np.argsort(col, kind="stable")
        if col[order[0]] == col[order[-1]]:  # constant column: nothing binds
            Z[:, j] = np.sort(crng.standard_normal(n))
            continue
        if n_cols == 1:
            neighbor = j
        else:
            dist_row = D[:, j].copy()
            dist_row[j] = np.inf
            neighbor = int(np.argmin(dist_row))
        pts = np.column_stack([Y_star[:, neighbor], Y_star[:, j]])
        k_hi = min(KMEANS_MAX_K, n)
        fits = []
        inertias = []
        for kk in range(1, k_hi + 1):
            centers, labels, weights = kmeans(pts, kk, crng)
            fits.append((centers, labels, weights))
            inertias.append(inertia(pts, centers, labels))
        best = elbow_select(inertias)
        centers, labels, weights = fits[best - 1]
        variances = np.empty(best)
        for c in range(best):
            members = labels == c
            if np.any(members):
                variances[c] = np.sum((pts[members] - centers[c]) ** 2) / (2.0 * members.sum())
            else:
                variances[c] = 0.0
        variances = np.maximum(variances, 1e-12)
        comp = crng.choice(best, size=n, p=weights / weights.sum())
        sims = centers[comp] + np.sqrt(variances[comp])[:, None] * crng.standard_normal((n, 2))
        draws = sims[:, 1]
        # standardize: keeps threshold and spike scales column-scale-free
        spread = draws.std()
        if spread > 0:
            draws = (draws - draws.mean()) / spread
        z_sim = np.sort(draws)
        for r in range(1, n):  # order statistics must be strict for rank matching
            if z_sim[r] <= z_sim[r - 1]:
                z_sim[r] = np.nextafter(z_sim[r - 1], np.inf)
        Z[order, j] = z_sim
    return Z


def double_svd_init(Z, dims, rng):
    """Layer-recursive (B, A) start: SVD scores, median binarization, regressions."""
    n = Z.shape[0]
    A_layers = []
    B = []
    data = np.asarray(Z, dtype=float)
    gamma = None
    for d in range(1, dims.depth + 1):
        k_d = dims.widths[d - 1]
        centered = data - data.mean(axis=0)
        u, s, vt = np.linalg.svd(centered, full_matrices=False)
        rank = min(k_d, s.shape[0])
        scores = u[:, :rank] * s[:rank]
        if rank < k_d:
            scores = np.hstack([scores, np.zeros((n, k_d - rank))])
        A_d = np.empty((n, k_d), dtype=np.int8)
        for k in range(k_d):
            col = scores[:, k]
            if col.max() - col.min() < 1e-12:
                A_d[:, k] = rng.integers(0, 2, n, dtype=np.int8)
            else:
                A_d[:, k] = col > np.median(col)
        design = np.hstack([np.ones((n, 1)), A_d.astype(float)])
        rows = data.shape[1]
        B_d = np.empty((rows, 1 + k_d))
        if d == 1:
            coef, *_ = np.linalg.lstsq(design, data, rcond=None)
            B_d[:] = coef.T
            resid = data - design @ coef
            gamma = np.maximum(np.mean(resid**2, axis=0), GAMMA_FLOOR)
        else:
            zero_w = np.zeros(1 + k_d)
            for r in range(rows):
                fit = solve_weighted_l1_logistic(design, data[:, r], zero_w, tau=1.0)
                B_d[r] = fit.coef
        B.append(B_d)
        A_layers.append(A_d)
        data = A_d.astype(float)
    pi = np.clip(A_layers[-1].mean(axis=0), 0.05, 0.95)
    params = DdeParams(dims, B, gamma, pi)
    return params, A_layers


def initial_state(table, dims, rng):
    """Full starting point for a fit: rank-consistent Z plus double-SVD params."""
    Z = spectral_init_z(table, rng)
    params, A_layers = double_svd_init(Z, dims, rng)
    return params, LatentState(A_layers, Z)
