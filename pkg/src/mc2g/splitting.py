"""Edge splitting of the observed graphs into weak-recovery and refinement parts."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import SimpleGraph


@dataclass(frozen=True)
class SplitGraphs:
    """Disjoint partition of a graph's edges; part_a feeds the spectral stage."""

    part_a: SimpleGraph
    part_b: SimpleGraph
    split_probability: float


def default_split_probability(n_nodes: int) -> float:
    """1/sqrt(log n), the rate used for the analyzed split."""
    if n_nodes < 3:
        raise ValueError("need at least 3 nodes for a meaningful split")
    return 1.0 / math.sqrt(math.log(n_nodes))


def split_graph(g: SimpleGraph, rng: np.random.Generator,
                q: float | None = None) -> SplitGraphs:
    """Route each edge independently to part_a with probability q.

    Splitting the observed edges directly is distributionally identical to
    first splitting the complete graph and intersecting: an edge lands in
    part_a iff two independent coins both come up, in either order.
    """
    if q is None:
        q = default_split_probability(g.n_nodes)
    if not 0.0 < q < 1.0:
        raise ValueError("split probability must lie in (0, 1)")
    to_a = rng.random(g.n_edges) < q
    return SplitGraphs(
        part_a=SimpleGraph(g.n_nodes, g.edges[to_a]),
        part_b=SimpleGraph(g.n_nodes, g.edges[~to_a]),
        split_probability=q,
    )


def identity_split(g: SimpleGraph) -> SplitGraphs:
    """Simplified mode: both stages see the full graph (sentinel probability 1)."""
    return SplitGraphs(part_a=g, part_b=g, split_probability=1.0)
