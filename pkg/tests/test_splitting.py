"""Edge splitting into weak-recovery and refinement parts."""

import math

import numpy as np
import pytest

from mc2g.core import SimpleGraph
from mc2g.splitting import (default_split_probability, identity_split,
                            split_graph)


def random_graph(n, p, seed):
    rng = np.random.default_rng(seed)
    ii, jj = np.triu_indices(n, k=1)
    keep = rng.random(ii.size) < p
    return SimpleGraph(n, np.column_stack([ii[keep], jj[keep]]))


class TestDefaultProbability:
    def test_value_at_2000(self):
        assert default_split_probability(2000) == pytest.approx(0.3627, abs=1e-4)

    def test_tiny_graph_rejected(self):
        with pytest.raises(ValueError):
            default_split_probability(2)


class TestSplitGraph:
    def test_partition_covers_input(self):
        g = random_graph(60, 0.2, 1)
        split = split_graph(g, np.random.default_rng(2))
        merged = np.concatenate([split.part_a.edges, split.part_b.edges])
        merged = merged[np.lexsort((merged[:, 1], merged[:, 0]))]
        assert np.array_equal(merged, g.edges)
        # disjoint by construction
        a = {tuple(e) for e in split.part_a.edges}
        b = {tuple(e) for e in split.part_b.edges}
        assert not (a & b)

    def test_empty_graph(self):
        g = SimpleGraph(10, np.empty((0, 2), dtype=np.int64))
        split = split_graph(g, np.random.default_rng(0), q=0.5)
        assert split.part_a.n_edges == 0
        assert split.part_b.n_edges == 0

    def test_invalid_q(self):
        g = random_graph(10, 0.5, 0)
        for q in (0.0, 1.0, -0.2, 1.5):
            with pytest.raises(ValueError):
                split_graph(g, np.random.default_rng(0), q=q)

    def test_fraction_within_5_sigma(self):
        g = random_graph(80, 0.3, 3)
        q = 0.4
        rng = np.random.default_rng(4)
        repeats = 200
        total = sum(split_graph(g, rng, q=q).part_a.n_edges
                    for _ in range(repeats))
        trials = repeats * g.n_edges
        mean = trials * q
        sigma = math.sqrt(trials * q * (1 - q))
        assert abs(total - mean) <= 5 * sigma

    def test_default_q_recorded(self):
        g = random_graph(50, 0.3, 5)
        split = split_graph(g, np.random.default_rng(0))
        assert split.split_probability == pytest.approx(
            1.0 / math.sqrt(math.log(50)))


class TestIdentitySplit:
    def test_both_parts_equal_input(self):
        g = random_graph(30, 0.2, 7)
        split = identity_split(g)
        assert split.part_a is g
        assert split.part_b is g
        assert split.split_probability == 1.0
