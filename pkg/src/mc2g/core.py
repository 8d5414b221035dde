"""Shared domain types and permutation-aware clustering metrics."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix

# Exhaustive permutation search is cheap up to this many clusters; beyond it
# we fall back to the Hungarian assignment, which gives the same optimum.
EXHAUSTIVE_K_MAX = 8
PERMUTATION_K_MAX = 12


@dataclass(frozen=True)
class ClusterLabels:
    """Assignment of entities to clusters, indices in 0..k-1."""

    assignments: np.ndarray
    k: int

    def __post_init__(self):
        arr = np.asarray(self.assignments, dtype=np.int64)
        object.__setattr__(self, "assignments", arr)
        if self.k < 1:
            raise ValueError("k must be positive")
        if arr.ndim != 1:
            raise ValueError("assignments must be one-dimensional")
        if arr.size and (arr.min() < 0 or arr.max() >= self.k):
            raise ValueError("cluster indices must lie in [0, k)")

    @property
    def n(self) -> int:
        return self.assignments.size

    def cluster_sizes(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.k)

    def onehot(self) -> np.ndarray:
        out = np.zeros((self.n, self.k))
        out[np.arange(self.n), self.assignments] = 1.0
        return out


@dataclass(frozen=True)
class RatingAlphabet:
    """Ordered finite set of raw rating values."""

    symbols: tuple

    def __post_init__(self):
        syms = tuple(int(s) for s in self.symbols)
        object.__setattr__(self, "symbols", syms)
        if len(syms) < 2:
            raise ValueError("alphabet needs at least two symbols")
        if len(set(syms)) != len(syms):
            raise ValueError("alphabet symbols must be distinct")

    @property
    def size(self) -> int:
        return len(self.symbols)

    def index_of(self, value) -> int:
        try:
            return self.symbols.index(int(value))
        except ValueError:
            raise ValueError(f"value {value!r} not in alphabet {self.symbols}") from None

    def values(self) -> np.ndarray:
        return np.asarray(self.symbols, dtype=np.int64)


@dataclass(frozen=True)
class RatingObservation:
    """Sparse (user, item, symbol-index) triplets; absent pairs are erasures."""

    n_users: int
    n_items: int
    users: np.ndarray
    items: np.ndarray
    symbols: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.users, dtype=np.int64)
        i = np.asarray(self.items, dtype=np.int64)
        z = np.asarray(self.symbols, dtype=np.int64)
        object.__setattr__(self, "users", u)
        object.__setattr__(self, "items", i)
        object.__setattr__(self, "symbols", z)
        if not (u.size == i.size == z.size):
            raise ValueError("users/items/symbols must have equal length")
        if u.size:
            if u.min() < 0 or u.max() >= self.n_users:
                raise ValueError("user index out of range")
            if i.min() < 0 or i.max() >= self.n_items:
                raise ValueError("item index out of range")
            keys = u * self.n_items + i
            if np.unique(keys).size != keys.size:
                raise ValueError("duplicate (user, item) rating")

    @property
    def n_observed(self) -> int:
        return self.users.size


@dataclass(frozen=True)
class SimpleGraph:
    """Undirected graph on indexed nodes; edges stored once with i < j."""

    n_nodes: int
    edges: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if e.size:
            if e.min() < 0 or e.max() >= self.n_nodes:
                raise ValueError("edge endpoint out of range")
            if np.any(e[:, 0] == e[:, 1]):
                raise ValueError("self-loops are not allowed")
            e = np.sort(e, axis=1)
            e = np.unique(e, axis=0)
        object.__setattr__(self, "edges", e)

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    def adjacency(self) -> csr_matrix:
        i, j = self.edges[:, 0], self.edges[:, 1]
        data = np.ones(2 * self.n_edges)
        rows = np.concatenate([i, j])
        cols = np.concatenate([j, i])
        return csr_matrix((data, (rows, cols)), shape=(self.n_nodes, self.n_nodes))

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_nodes, dtype=np.int64)
        if self.n_edges:
            deg += np.bincount(self.edges[:, 0], minlength=self.n_nodes)
            deg += np.bincount(self.edges[:, 1], minlength=self.n_nodes)
        return deg


@dataclass(frozen=True)
class NominalMatrix:
    """Block-constant ground truth ratings stored as a k1 x k2 symbol table."""

    block: np.ndarray
    user_labels: ClusterLabels
    item_labels: ClusterLabels
    alphabet: RatingAlphabet

    def __post_init__(self):
        b = np.asarray(self.block, dtype=np.int64)
        object.__setattr__(self, "block", b)
        if b.shape != (self.user_labels.k, self.item_labels.k):
            raise ValueError("block table must be k1 x k2")
        if b.size and (b.min() < 0 or b.max() >= self.alphabet.size):
            raise ValueError("block entry is not a valid symbol index")


def expand_nominal(nm: NominalMatrix) -> np.ndarray:
    """Expand the block table to the full n x m matrix of symbol indices."""
    return nm.block[np.ix_(nm.user_labels.assignments, nm.item_labels.assignments)]


def expand_nominal_values(nm: NominalMatrix) -> np.ndarray:
    """Expand to raw alphabet values (used for MAE)."""
    return nm.alphabet.values()[expand_nominal(nm)]


def _confusion(est: ClusterLabels, truth: ClusterLabels) -> np.ndarray:
    if est.k != truth.k:
        raise ValueError(f"cluster counts differ: {est.k} != {truth.k}")
    if est.n != truth.n:
        raise ValueError(f"entity counts differ: {est.n} != {truth.n}")
    # conf[a, b] = #entities with truth a and estimate b
    conf = np.zeros((truth.k, truth.k), dtype=np.int64)
    np.add.at(conf, (truth.assignments, est.assignments), 1)
    return conf


def misclassification_proportion(est: ClusterLabels, truth: ClusterLabels):
    """Permutation-minimized fraction of mislabeled entities.

    Returns (fraction, permutation) where permutation maps true labels to
    estimated labels. Exhaustive for small k, Hungarian for k up to 12.
    """
    if est.k > PERMUTATION_K_MAX:
        raise ValueError(f"k={est.k} exceeds the permutation search bound "
                         f"{PERMUTATION_K_MAX}; use match_labels_hungarian")
    if est.k > EXHAUSTIVE_K_MAX:
        return match_labels_hungarian(est, truth)
    conf = _confusion(est, truth)
    n = est.n
    best_agree = -1
    best_perm = None
    for perm in itertools.permutations(range(est.k)):
        agree = int(conf[np.arange(est.k), perm].sum())
        if agree > best_agree:
            best_agree = agree
            best_perm = perm
    return 1.0 - best_agree / n, tuple(best_perm)


def match_labels_hungarian(est: ClusterLabels, truth: ClusterLabels):
    """Assignment-problem variant of misclassification_proportion."""
    conf = _confusion(est, truth)
    rows, cols = linear_sum_assignment(-conf)
    perm = [0] * est.k
    for r, c in zip(rows, cols):
        perm[r] = int(c)
    agree = int(conf[rows, cols].sum())
    return 1.0 - agree / est.n, tuple(perm)
