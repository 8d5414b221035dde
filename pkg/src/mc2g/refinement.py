"""Stages 3-4: per-entity likelihood refinement and nominal reconstruction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (ClusterLabels, NominalMatrix, RatingAlphabet,
                   RatingObservation, SimpleGraph)
from .estimation import ModelEstimates


@dataclass(frozen=True)
class LikelihoodBreakdown:
    """Per-candidate-cluster scores for one entity."""

    graph_term: np.ndarray
    rating_term: np.ndarray
    argmax: int
    runner_up_margin: float

    @property
    def scores(self) -> np.ndarray:
        return self.graph_term + self.rating_term


def _log_odds(probs: np.ndarray) -> np.ndarray:
    return np.log(probs) - np.log1p(-probs)


def _breakdown(graph_term: np.ndarray, rating_term: np.ndarray) -> LikelihoodBreakdown:
    scores = graph_term + rating_term
    best = int(np.argmax(scores))  # lowest index wins ties
    if scores.size > 1:
        margin = float(scores[best] - np.max(np.delete(scores, best)))
    else:
        margin = float("inf")
    return LikelihoodBreakdown(graph_term, rating_term, best, margin)


def _user_terms(obs: RatingObservation, g_user: SimpleGraph | None,
                init_user: ClusterLabels, init_item: ClusterLabels,
                est: ModelEstimates):
    """Vectorized graph and rating likelihood terms, shapes n x k1."""
    n, k1 = init_user.n, init_user.k
    graph = np.zeros((n, k1))
    if g_user is not None:
        edge_counts = np.zeros((n, k1))
        if g_user.n_edges:
            i, j = g_user.edges[:, 0], g_user.edges[:, 1]
            np.add.at(edge_counts, (i, init_user.assignments[j]), 1.0)
            np.add.at(edge_counts, (j, init_user.assignments[i]), 1.0)
        graph = edge_counts @ _log_odds(est.b_user.probs).T
    rating = np.zeros((n, k1))
    if obs.n_observed:
        b = init_item.assignments[obs.items]
        logq = np.log(est.q_hat)  # k1 x k2 x |Z|
        for a in range(k1):
            w = logq[a, b, obs.symbols]
            rating[:, a] = np.bincount(obs.users, weights=w, minlength=n)
    return graph, rating


def _item_terms(obs: RatingObservation, g_item: SimpleGraph | None,
                init_user: ClusterLabels, init_item: ClusterLabels,
                est: ModelEstimates):
    """Role-swapped mirror of _user_terms, shapes m x k2."""
    m, k2 = init_item.n, init_item.k
    graph = np.zeros((m, k2))
    if g_item is not None:
        edge_counts = np.zeros((m, k2))
        if g_item.n_edges:
            i, j = g_item.edges[:, 0], g_item.edges[:, 1]
            np.add.at(edge_counts, (i, init_item.assignments[j]), 1.0)
            np.add.at(edge_counts, (j, init_item.assignments[i]), 1.0)
        graph = edge_counts @ _log_odds(est.b_item.probs).T
    rating = np.zeros((m, k2))
    if obs.n_observed:
        a = init_user.assignments[obs.users]
        logq = np.log(est.q_hat)
        for b in range(k2):
            w = logq[a, b, obs.symbols]
            rating[:, b] = np.bincount(obs.items, weights=w, minlength=m)
    return graph, rating


def refine_user(i: int, obs: RatingObservation, g_user: SimpleGraph | None,
                init_user: ClusterLabels, init_item: ClusterLabels,
                est: ModelEstimates):
    """Most likely cluster for user i against the frozen initial labels."""
    k1 = init_user.k
    graph = np.zeros(k1)
    if g_user is not None and g_user.n_edges:
        e = g_user.edges
        mask = (e[:, 0] == i) | (e[:, 1] == i)
        neigh = np.where(e[mask, 0] == i, e[mask, 1], e[mask, 0])
        counts = np.bincount(init_user.assignments[neigh], minlength=k1).astype(float)
        graph = _log_odds(est.b_user.probs) @ counts
    rating = np.zeros(k1)
    sel = obs.users == i
    if sel.any():
        b = init_item.assignments[obs.items[sel]]
        z = obs.symbols[sel]
        logq = np.log(est.q_hat)
        for a in range(k1):
            rating[a] = logq[a, b, z].sum()
    bd = _breakdown(graph, rating)
    return bd.argmax, bd


def refine_item(j: int, obs: RatingObservation, g_item: SimpleGraph | None,
                init_user: ClusterLabels, init_item: ClusterLabels,
                est: ModelEstimates):
    """Most likely cluster for item j against the frozen initial labels."""
    k2 = init_item.k
    graph = np.zeros(k2)
    if g_item is not None and g_item.n_edges:
        e = g_item.edges
        mask = (e[:, 0] == j) | (e[:, 1] == j)
        neigh = np.where(e[mask, 0] == j, e[mask, 1], e[mask, 0])
        counts = np.bincount(init_item.assignments[neigh], minlength=k2).astype(float)
        graph = _log_odds(est.b_item.probs) @ counts
    rating = np.zeros(k2)
    sel = obs.items == j
    if sel.any():
        a = init_user.assignments[obs.users[sel]]
        z = obs.symbols[sel]
        logq = np.log(est.q_hat)
        for b in range(k2):
            rating[b] = logq[a, b, z].sum()
    bd = _breakdown(graph, rating)
    return bd.argmax, bd


def refine_all(obs: RatingObservation, g_user: SimpleGraph | None,
               g_item: SimpleGraph | None, init_user: ClusterLabels,
               init_item: ClusterLabels, est: ModelEstimates):
    """One pass of Stages 3-4: every entity refined against the same snapshot.

    Refinements never see each other's updates, so processing order is
    irrelevant and the pass is safe to parallelize.
    """
    ug, ur = _user_terms(obs, g_user, init_user, init_item, est)
    ig, ir = _item_terms(obs, g_item, init_user, init_item, est)
    new_user = np.argmax(ug + ur, axis=1)
    new_item = np.argmax(ig + ir, axis=1)
    return (ClusterLabels(new_user, init_user.k),
            ClusterLabels(new_item, init_item.k))


def reconstruct_nominal_argmax(user_labels: ClusterLabels, item_labels: ClusterLabels,
                               est: ModelEstimates, alphabet: RatingAlphabet) -> NominalMatrix:
    """Block (a, b) gets the mode of the estimated rating distribution."""
    block = np.argmax(est.q_hat, axis=2)  # lowest symbol index on ties
    return NominalMatrix(block, user_labels, item_labels, alphabet)


def reconstruct_nominal_majority(user_labels: ClusterLabels, item_labels: ClusterLabels,
                                 obs: RatingObservation, alphabet: RatingAlphabet):
    """Block (a, b) gets the most frequent observed symbol; empty blocks flagged."""
    k1, k2, zsize = user_labels.k, item_labels.k, alphabet.size
    counts = np.zeros((k1, k2, zsize), dtype=np.int64)
    if obs.n_observed:
        a = user_labels.assignments[obs.users]
        b = item_labels.assignments[obs.items]
        np.add.at(counts, (a, b, obs.symbols), 1)
    block = np.argmax(counts, axis=2)
    empty = counts.sum(axis=2) == 0
    block[empty] = 0
    nm = NominalMatrix(block, user_labels, item_labels, alphabet)
    return nm, empty
