"""Generative model: SBM graphs, personalized ratings, subsampling, file I/O."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (ClusterLabels, NominalMatrix, RatingAlphabet,
                   RatingObservation, SimpleGraph)


@dataclass(frozen=True)
class ConnectivityMatrix:
    """Symmetric k x k table of SBM edge probabilities."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        object.__setattr__(self, "probs", p)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ValueError("connectivity matrix must be square")
        if not np.allclose(p, p.T):
            raise ValueError("connectivity matrix must be symmetric")
        if p.size and (p.min() < 0 or p.max() > 1):
            raise ValueError("edge probabilities must lie in [0, 1]")

    @property
    def k(self) -> int:
        return self.probs.shape[0]


@dataclass(frozen=True)
class PersonalizationModel:
    """Row-stochastic |Z| x |Z| table; row z is the law of V given nominal z."""

    conditional: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.conditional, dtype=np.float64)
        object.__setattr__(self, "conditional", q)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise ValueError("personalization table must be square")
        if not np.allclose(q.sum(axis=1), 1.0, atol=1e-12):
            raise ValueError("each personalization row must sum to 1")
        diag = np.diag(q)
        for z in range(q.shape[0]):
            others = np.delete(q[z], z)
            if others.size and diag[z] <= others.max():
                raise ValueError("nominal symbol must be the most likely rating")

    @property
    def size(self) -> int:
        return self.conditional.shape[0]


def uniform_noise_personalization(size: int, correct_prob: float) -> PersonalizationModel:
    """Q(v|z) = correct_prob if v == z, else uniform over the rest."""
    if size < 2:
        raise ValueError("alphabet size must be at least 2")
    off = (1.0 - correct_prob) / (size - 1)
    if correct_prob <= off:
        raise ValueError("correct_prob too small for diagonal dominance")
    q = np.full((size, size), off)
    np.fill_diagonal(q, correct_prob)
    return PersonalizationModel(q)


def equal_size_labels(n: int, k: int) -> ClusterLabels:
    """Deterministic block assignment; sizes differ by at most one."""
    sizes = np.full(k, n // k, dtype=np.int64)
    sizes[: n % k] += 1
    return ClusterLabels(np.repeat(np.arange(k), sizes), k)


def sample_sbm(labels: ClusterLabels, conn: ConnectivityMatrix,
               rng: np.random.Generator) -> SimpleGraph:
    """Draw an SBM graph: each pair independent Bernoulli(B[sigma_i, sigma_j])."""
    if conn.k != labels.k:
        raise ValueError("connectivity dimension must equal labels.k")
    n = labels.n
    members = [np.flatnonzero(labels.assignments == a) for a in range(labels.k)]
    chunks = []
    for a in range(labels.k):
        for ap in range(a, labels.k):
            p = conn.probs[a, ap]
            if a == ap:
                u = members[a]
                if u.size < 2:
                    continue
                ii, jj = np.triu_indices(u.size, k=1)
                src, dst = u[ii], u[jj]
            else:
                u, v = members[a], members[ap]
                if not (u.size and v.size):
                    continue
                src = np.repeat(u, v.size)
                dst = np.tile(v, u.size)
            keep = rng.random(src.size) < p
            if keep.any():
                chunks.append(np.column_stack([src[keep], dst[keep]]))
    edges = np.concatenate(chunks) if chunks else np.empty((0, 2), dtype=np.int64)
    return SimpleGraph(n, edges)


def symmetric_conn_from_quality(n: int, k: int, quality: float,
                                beta_coeff: float = 0.25) -> ConnectivityMatrix:
    """Two-valued symmetric connectivity with I = n(sqrt(a)-sqrt(b))^2/log n.

    Convention: beta = beta_coeff * log(n)/n and alpha solves the quality
    identity exactly (natural log).
    """
    if quality < 0:
        raise ValueError("quality must be non-negative")
    if beta_coeff <= 0:
        raise ValueError("beta_coeff must be positive")
    logn = math.log(n)
    beta = beta_coeff * logn / n
    alpha = (math.sqrt(quality * logn / n) + math.sqrt(beta)) ** 2
    if alpha > 1:
        raise ValueError(f"implied intra-cluster probability {alpha:.4f} exceeds 1")
    probs = np.full((k, k), beta)
    np.fill_diagonal(probs, alpha)
    return ConnectivityMatrix(probs)


def sample_personalized_ratings(nm: NominalMatrix, pm: PersonalizationModel,
                                rng: np.random.Generator) -> np.ndarray:
    """Full n x m table of symbol indices, cell (i,j) drawn from row N_ij."""
    if pm.size != nm.alphabet.size:
        raise ValueError("personalization table size must match the alphabet")
    nominal = nm.block[np.ix_(nm.user_labels.assignments, nm.item_labels.assignments)]
    cum = np.cumsum(pm.conditional, axis=1)
    u = rng.random(nominal.shape)
    out = np.empty(nominal.shape, dtype=np.int64)
    for z in range(pm.size):
        mask = nominal == z
        if mask.any():
            out[mask] = np.searchsorted(cum[z], u[mask], side="right")
    np.clip(out, 0, pm.size - 1, out=out)
    return out


def subsample(ratings: np.ndarray, p: float,
              rng: np.random.Generator) -> RatingObservation:
    """Keep each entry independently with probability p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("sample probability must lie in [0, 1]")
    n, m = ratings.shape
    mask = rng.random((n, m)) < p
    users, items = np.nonzero(mask)
    return RatingObservation(n, m, users, items, ratings[mask])


@dataclass(frozen=True)
class ModelParams:
    """Parameters of one synthetic scenario."""

    n: int
    m: int
    k1: int
    k2: int
    alphabet: RatingAlphabet
    z_block: np.ndarray              # k1 x k2 symbol indices
    personalization: PersonalizationModel
    conn_user: ConnectivityMatrix
    conn_item: ConnectivityMatrix
    p: float


@dataclass(frozen=True)
class GeneratedInstance:
    """One draw of the generative model together with its hidden ground truth."""

    params: ModelParams
    seed: int
    sigma: ClusterLabels
    tau: ClusterLabels
    nominal: NominalMatrix
    personalized: np.ndarray
    obs: RatingObservation
    g_user: SimpleGraph
    g_item: SimpleGraph


def generate_instance(params: ModelParams, seed: int,
                      shuffle_nodes: bool = False) -> GeneratedInstance:
    """Deterministic instance for (params, seed).

    Sub-streams for the graphs, ratings, and subsampling are spawned from a
    single SeedSequence so each piece is reproducible in isolation.
    """
    ss = np.random.SeedSequence([seed])
    ss_g1, ss_g2, ss_v, ss_sub, ss_shuf = ss.spawn(5)
    sigma = equal_size_labels(params.n, params.k1)
    tau = equal_size_labels(params.m, params.k2)
    if shuffle_nodes:
        rng = np.random.default_rng(ss_shuf)
        sigma = ClusterLabels(rng.permutation(sigma.assignments), params.k1)
        tau = ClusterLabels(rng.permutation(tau.assignments), params.k2)
    nominal = NominalMatrix(params.z_block, sigma, tau, params.alphabet)
    g_user = sample_sbm(sigma, params.conn_user, np.random.default_rng(ss_g1))
    g_item = sample_sbm(tau, params.conn_item, np.random.default_rng(ss_g2))
    personalized = sample_personalized_ratings(
        nominal, params.personalization, np.random.default_rng(ss_v))
    obs = subsample(personalized, params.p, np.random.default_rng(ss_sub))
    return GeneratedInstance(params, seed, sigma, tau, nominal, personalized,
                             obs, g_user, g_item)


# ---------------------------------------------------------------------------
# File formats: edge lists ("i j" per line, '#' comments), rating CSVs
# ("user,item,value" with raw alphabet values), label files (one int per line).

def load_edge_list(path, n_nodes: int | None = None) -> SimpleGraph:
    path = Path(path)
    if n_nodes is None:
        sidecar = path.with_suffix(path.suffix + ".json")
        if not sidecar.exists():
            raise ValueError(f"node count not given and sidecar {sidecar} missing")
        n_nodes = int(json.loads(sidecar.read_text())["n_nodes"])
    edges = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'i j', got {raw!r}")
            try:
                i, j = int(parts[0]), int(parts[1])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-integer endpoint") from None
            if i == j:
                raise ValueError(f"{path}:{lineno}: self-loop {i} {j}")
            if not (0 <= i < n_nodes and 0 <= j < n_nodes):
                raise ValueError(f"{path}:{lineno}: endpoint out of range [0, {n_nodes})")
            edges.append((i, j))
    return SimpleGraph(n_nodes, np.asarray(edges, dtype=np.int64).reshape(-1, 2))


def save_edge_list(g: SimpleGraph, path, write_sidecar: bool = True) -> None:
    path = Path(path)
    with open(path, "w") as fh:
        for i, j in g.edges:
            fh.write(f"{i} {j}\n")
    if write_sidecar:
        sidecar = path.with_suffix(path.suffix + ".json")
        sidecar.write_text(json.dumps({"n_nodes": g.n_nodes}) + "\n")


def load_ratings_csv(path, alphabet: RatingAlphabet, n_users: int,
                     n_items: int) -> RatingObservation:
    users, items, symbols = [], [], []
    seen = set()
    with open(path) as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            if len(row) != 3:
                raise ValueError(f"{path}:{lineno}: expected 'user,item,value'")
            try:
                u, i, v = int(row[0]), int(row[1]), int(row[2])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-integer field") from None
            if not (0 <= u < n_users and 0 <= i < n_items):
                raise ValueError(f"{path}:{lineno}: index out of range")
            if (u, i) in seen:
                raise ValueError(f"{path}:{lineno}: duplicate rating for ({u}, {i})")
            seen.add((u, i))
            users.append(u)
            items.append(i)
            symbols.append(alphabet.index_of(v))
    return RatingObservation(n_users, n_items,
                             np.asarray(users, dtype=np.int64),
                             np.asarray(items, dtype=np.int64),
                             np.asarray(symbols, dtype=np.int64))


def save_ratings_csv(obs: RatingObservation, alphabet: RatingAlphabet, path) -> None:
    values = alphabet.values()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for u, i, z in zip(obs.users, obs.items, obs.symbols):
            writer.writerow([int(u), int(i), int(values[z])])


def load_labels(path, k: int | None = None) -> ClusterLabels:
    vals = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                vals.append(int(line))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-integer label") from None
    arr = np.asarray(vals, dtype=np.int64)
    if k is None:
        k = int(arr.max()) + 1 if arr.size else 1
    return ClusterLabels(arr, k)


def save_labels(labels: ClusterLabels, path) -> None:
    with open(path, "w") as fh:
        for a in labels.assignments:
            fh.write(f"{a}\n")
