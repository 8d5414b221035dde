"""Stage 2: plug-in MLE of connectivity matrices and personalization rows."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import ClusterLabels, RatingAlphabet, RatingObservation, SimpleGraph
from .genmodel import ConnectivityMatrix


def _pair_counts(sizes: np.ndarray) -> np.ndarray:
    """Number of candidate node pairs per cluster pair."""
    k = sizes.size
    pairs = np.outer(sizes, sizes).astype(np.float64)
    np.fill_diagonal(pairs, sizes * (sizes - 1) / 2.0)
    return pairs


def estimate_connectivity(g: SimpleGraph, labels: ClusterLabels):
    """Edge-count MLE of the connectivity matrix, clamped away from {0, 1}.

    Clamping to [1/n^2, 1 - 1/n^2] keeps the refinement log-odds finite.
    Returns (estimate, degenerate) where degenerate marks diagonal cells of
    clusters too small to define a within-cluster rate.
    """
    if labels.n != g.n_nodes:
        raise ValueError("labels must cover the graph's nodes")
    k = labels.k
    counts = np.zeros((k, k), dtype=np.float64)
    if g.n_edges:
        la = labels.assignments[g.edges[:, 0]]
        lb = labels.assignments[g.edges[:, 1]]
        np.add.at(counts, (la, lb), 1.0)
        np.add.at(counts, (lb, la), 1.0)
        # diagonal got both orientations of each within-cluster edge
        counts[np.diag_indices(k)] /= 2.0
    sizes = labels.cluster_sizes()
    pairs = _pair_counts(sizes)
    degenerate = np.zeros((k, k), dtype=bool)
    floor = 1.0 / g.n_nodes ** 2
    probs = np.empty((k, k), dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        probs = np.where(pairs > 0, counts / np.where(pairs > 0, pairs, 1.0), 0.0)
    degenerate[np.diag_indices(k)] = sizes < 2
    probs[degenerate] = floor
    np.clip(probs, floor, 1.0 - floor, out=probs)
    probs = (probs + probs.T) / 2.0
    return ConnectivityMatrix(probs), degenerate


def estimate_personalization(obs: RatingObservation, user_labels: ClusterLabels,
                             item_labels: ClusterLabels, alphabet: RatingAlphabet,
                             smoothing: float = 1.0) -> np.ndarray:
    """Smoothed per-block empirical rating distribution, shape k1 x k2 x |Z|.

    Add-`smoothing` (Laplace) keeps every cell strictly positive so the
    refinement log-likelihoods stay finite; an unobserved block is uniform.
    """
    if user_labels.n != obs.n_users or item_labels.n != obs.n_items:
        raise ValueError("labels must cover the observation's users and items")
    if smoothing <= 0:
        raise ValueError("smoothing constant must be positive")
    k1, k2, zsize = user_labels.k, item_labels.k, alphabet.size
    counts = np.zeros((k1, k2, zsize), dtype=np.float64)
    if obs.n_observed:
        a = user_labels.assignments[obs.users]
        b = item_labels.assignments[obs.items]
        np.add.at(counts, (a, b, obs.symbols), 1.0)
    totals = counts.sum(axis=2, keepdims=True)
    return (counts + smoothing) / (totals + smoothing * zsize)


@dataclass(frozen=True)
class ModelEstimates:
    """Stage-2 output: connectivity estimates and smoothed rating distributions."""

    b_user: ConnectivityMatrix
    b_item: ConnectivityMatrix
    q_hat: np.ndarray  # k1 x k2 x |Z|, each cell a distribution
    degenerate_user: np.ndarray = field(default=None)
    degenerate_item: np.ndarray = field(default=None)

    def __post_init__(self):
        q = np.asarray(self.q_hat, dtype=np.float64)
        object.__setattr__(self, "q_hat", q)
        if q.ndim != 3 or q.shape[:2] != (self.b_user.k, self.b_item.k):
            raise ValueError("q_hat must be k1 x k2 x |Z|")
        if not np.allclose(q.sum(axis=2), 1.0, atol=1e-9):
            raise ValueError("each q_hat cell must sum to 1")
        if np.any(q <= 0) or np.any(q >= 1):
            raise ValueError("q_hat entries must lie strictly in (0, 1)")
        for name in ("degenerate_user", "degenerate_item"):
            v = getattr(self, name)
            if v is None:
                k = self.b_user.k if name.endswith("user") else self.b_item.k
                object.__setattr__(self, name, np.zeros((k, k), dtype=bool))

    def to_jsonable(self) -> dict:
        return {
            "b_user": self.b_user.probs.tolist(),
            "b_item": self.b_item.probs.tolist(),
            "q_hat": self.q_hat.tolist(),
            "degenerate_user": self.degenerate_user.tolist(),
            "degenerate_item": self.degenerate_item.tolist(),
        }


def estimate_model(obs: RatingObservation, g_user: SimpleGraph, g_item: SimpleGraph,
                   user_labels: ClusterLabels, item_labels: ClusterLabels,
                   alphabet: RatingAlphabet, smoothing: float = 1.0) -> ModelEstimates:
    """Run all three Stage-2 estimators against the same initial labels.

    A graph passed as None (ablation) yields a flat 0.5 connectivity whose
    log-odds vanish, so the corresponding refinement term drops out.
    """
    def flat(k):
        return ConnectivityMatrix(np.full((k, k), 0.5)), np.zeros((k, k), dtype=bool)

    b_user, deg_u = flat(user_labels.k) if g_user is None \
        else estimate_connectivity(g_user, user_labels)
    b_item, deg_i = flat(item_labels.k) if g_item is None \
        else estimate_connectivity(g_item, item_labels)
    q_hat = estimate_personalization(obs, user_labels, item_labels, alphabet,
                                     smoothing=smoothing)
    return ModelEstimates(b_user, b_item, q_hat, deg_u, deg_i)
