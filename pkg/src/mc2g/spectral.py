"""Stage 1: spectral embedding via orthogonal iteration and k-means clustering."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from .core import ClusterLabels, SimpleGraph

TRIM_DEGREE_FACTOR = 20.0


@dataclass(frozen=True)
class SpectralConfig:
    k: int
    eig_tol: float = 1e-6
    eig_max_iter: int = 300
    kmeans_restarts: int = 10
    kmeans_max_iter: int = 100
    rng_seed: int = 0
    trim: bool = False

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("k must be at least 2")
        if self.eig_tol <= 0 or self.eig_max_iter <= 0:
            raise ValueError("tolerance and iteration cap must be positive")
        if self.kmeans_restarts <= 0 or self.kmeans_max_iter <= 0:
            raise ValueError("k-means restarts and iteration cap must be positive")


@dataclass(frozen=True)
class SpectralEmbedding:
    vectors: np.ndarray      # n x k, orthonormal columns
    eigenvalues: np.ndarray  # Ritz values, sorted by decreasing magnitude
    converged: bool
    n_iter: int


def _trimmed_adjacency(g: SimpleGraph) -> sp.csr_matrix:
    adj = g.adjacency()
    deg = g.degrees()
    avg = deg.mean() if g.n_nodes else 0.0
    heavy = deg > TRIM_DEGREE_FACTOR * avg
    if heavy.any():
        keep = sp.diags((~heavy).astype(float))
        adj = keep @ adj @ keep
    return sp.csr_matrix(adj)


def spectral_embed(g: SimpleGraph, k: int, cfg: SpectralConfig) -> SpectralEmbedding:
    """Top-k adjacency eigenvectors by magnitude, via block power iteration.

    Re-orthonormalizes every step; convergence is measured by the sine of the
    largest principal angle between successive subspaces. Non-convergence is
    reported, not raised.
    """
    n = g.n_nodes
    if k >= n:
        raise ValueError(f"k={k} must be smaller than the node count {n}")
    adj = _trimmed_adjacency(g) if cfg.trim else g.adjacency()
    rng = np.random.default_rng(np.random.SeedSequence([cfg.rng_seed, 0x5bec]))
    q, _ = np.linalg.qr(rng.standard_normal((n, k)))
    converged = False
    n_iter = 0
    for n_iter in range(1, cfg.eig_max_iter + 1):
        y = adj @ q
        q_new, _ = np.linalg.qr(y)
        # fix QR sign ambiguity so the angle test is meaningful
        overlap = q_new.T @ q
        s = np.linalg.svd(overlap, compute_uv=False)
        q = q_new
        change = np.sqrt(max(0.0, 1.0 - min(s.min(), 1.0) ** 2))
        if change < cfg.eig_tol:
            converged = True
            break
    # Rayleigh-Ritz rotation within the converged subspace
    small = q.T @ (adj @ q)
    small = (small + small.T) / 2.0
    vals, vecs = np.linalg.eigh(small)
    order = np.argsort(np.abs(vals))[::-1]
    vals = vals[order]
    q = q @ vecs[:, order]
    return SpectralEmbedding(q, vals, converged, n_iter)


def _kmeans_pp_init(x, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding; works for dense arrays and scipy sparse matrices."""
    n = x.shape[0]
    sq_norms = np.asarray(x.multiply(x).sum(axis=1)).ravel() if sp.issparse(x) \
        else (x ** 2).sum(axis=1)
    centers = np.empty((k, x.shape[1]))
    first = int(rng.integers(n))
    centers[0] = x[first].toarray().ravel() if sp.issparse(x) else x[first]
    d2 = np.full(n, np.inf)
    for c in range(1, k):
        prev = centers[c - 1]
        dist = sq_norms - 2 * (x @ prev) + prev @ prev
        np.minimum(d2, np.maximum(np.asarray(dist).ravel(), 0.0), out=d2)
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(np.searchsorted(np.cumsum(d2 / total), rng.random()))
            idx = min(idx, n - 1)
        centers[c] = x[idx].toarray().ravel() if sp.issparse(x) else x[idx]
    return centers


def _assign(x, centers: np.ndarray, sq_norms: np.ndarray):
    cross = x @ centers.T
    if sp.issparse(cross):
        cross = cross.toarray()
    d2 = sq_norms[:, None] - 2 * np.asarray(cross) + (centers ** 2).sum(axis=1)[None, :]
    np.maximum(d2, 0.0, out=d2)
    labels = np.argmin(d2, axis=1)  # lowest index wins ties
    return labels, d2


def kmeans(x, k: int, rng: np.random.Generator, restarts: int = 10,
           max_iter: int = 100):
    """Lloyd iterations with k-means++ seeding, best of `restarts` by WCSS.

    Empty clusters in the winning solution are repaired by re-seeding them at
    the farthest point of the currently largest cluster.
    """
    n = x.shape[0]
    sq_norms = np.asarray(x.multiply(x).sum(axis=1)).ravel() if sp.issparse(x) \
        else (x ** 2).sum(axis=1)
    best_labels, best_centers, best_cost = None, None, np.inf
    for _ in range(restarts):
        centers = _kmeans_pp_init(x, k, rng)
        labels = np.zeros(n, dtype=np.int64)
        for _ in range(max_iter):
            new_labels, d2 = _assign(x, centers, sq_norms)
            for c in range(k):
                mask = new_labels == c
                if mask.any():
                    mean = x[mask].mean(axis=0)
                    centers[c] = np.asarray(mean).ravel()
            if np.array_equal(new_labels, labels):
                labels = new_labels
                break
            labels = new_labels
        _, d2 = _assign(x, centers, sq_norms)
        cost = d2[np.arange(n), labels].sum()
        if cost < best_cost:
            best_cost, best_labels, best_centers = cost, labels, centers.copy()
    labels, centers = best_labels, best_centers
    # repair empty clusters deterministically
    while True:
        sizes = np.bincount(labels, minlength=k)
        empty = np.flatnonzero(sizes == 0)
        if empty.size == 0:
            break
        big = int(np.argmax(sizes))
        members = np.flatnonzero(labels == big)
        centroid = centers[big]
        diffs = x[members].toarray() - centroid if sp.issparse(x) \
            else x[members] - centroid
        far = members[int(np.argmax((diffs ** 2).sum(axis=1)))]
        centers[empty[0]] = x[far].toarray().ravel() if sp.issparse(x) else x[far]
        labels, _ = _assign(x, centers, sq_norms)
        # guarantee progress even if reassignment leaves the cluster empty
        labels[far] = empty[0]
    return labels, centers


def spectral_cluster(g: SimpleGraph, k: int, cfg: SpectralConfig | None = None) -> ClusterLabels:
    """Cluster nodes by k-means on the rows of the spectral embedding."""
    if cfg is None:
        cfg = SpectralConfig(k=k)
    elif cfg.k != k:
        cfg = replace(cfg, k=k)
    emb = spectral_embed(g, k, cfg)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.rng_seed, 0xa11]))
    labels, _ = kmeans(emb.vectors, k, rng, restarts=cfg.kmeans_restarts,
                       max_iter=cfg.kmeans_max_iter)
    return ClusterLabels(labels, k)
