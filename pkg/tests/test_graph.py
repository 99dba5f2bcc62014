#!/usr/bin/env python3
"""
Test suite for the communication topology module.
"""

import itertools
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from auv_formation.errors import (
    NegativeWeightError,
    NonSquareMatrixError,
    SelfLoopError,
    TopologyError,
)
from auv_formation.graph import (
    build_topology,
    chain_topology,
    has_leader_rooted_spanning_tree,
    laplacian,
)


def bfs_reachable(a: np.ndarray) -> bool:
    """Independent reachability check: repeated relaxation until fixpoint."""
    reached = {0}
    changed = True
    while changed:
        changed = False
        for i, j in zip(*np.nonzero(a)):
            if j in reached and i not in reached:
                reached.add(int(i))
                changed = True
    return len(reached) == a.shape[0]


@pytest.mark.unit
class TestBuildTopology:
    """Test cases for topology validation."""

    def test_valid_chain(self):
        topology = build_topology([[0, 0, 0], [1, 0, 0], [0, 1, 0]])
        assert topology.n_followers == 2
        assert topology.neighbors(1) == (0,)
        assert topology.neighbors(2) == (1,)
        assert topology.neighbors(0) == ()
        assert topology.edges() == [(1, 0), (2, 1)]

    def test_weights_are_read_only(self):
        topology = build_topology([[0, 0], [1, 0]])
        with pytest.raises(ValueError):
            topology.adjacency[1, 0] = 2.0

    def test_non_square_rejected(self):
        with pytest.raises(NonSquareMatrixError) as info:
            build_topology([[0, 1, 0], [1, 0, 0]])
        assert info.value.index == (2, 3)

    def test_negative_weight_rejected(self):
        with pytest.raises(NegativeWeightError) as info:
            build_topology([[0, 0], [-0.5, 0]])
        assert info.value.index == (1, 0)

    def test_self_loop_rejected(self):
        with pytest.raises(SelfLoopError) as info:
            build_topology([[0, 0], [1, 1]])
        assert info.value.index == (1, 1)

    def test_leader_only_rejected(self):
        with pytest.raises(TopologyError):
            build_topology([[0]])

    def test_errors_are_value_errors(self):
        with pytest.raises(ValueError):
            build_topology([[0, 0], [1, 1]])

    def test_chain_helper(self):
        topology = chain_topology(5)
        assert topology.n_followers == 5
        for i in range(1, 6):
            assert topology.neighbors(i) == (i - 1,)


@pytest.mark.unit
class TestLaplacian:
    """Test cases for Laplacian construction."""

    def test_rows_sum_to_zero(self):
        rng = np.random.default_rng(3)
        a = rng.uniform(0.0, 2.0, (5, 5))
        np.fill_diagonal(a, 0.0)
        pair = laplacian(build_topology(a))
        assert np.abs(pair.laplacian @ np.ones(5)).max() <= 1e-12

    def test_follower_block_relation(self):
        """H 1 = Psi 1 whenever the leader receives nothing."""
        a = np.array([[0, 0, 0], [1.5, 0, 0], [0, 2.0, 0]])
        pair = laplacian(build_topology(a))
        np.testing.assert_allclose(
            pair.follower_block @ np.ones(2), pair.leader_gain_diag @ np.ones(2), atol=1e-12
        )
        np.testing.assert_array_equal(pair.leader_gain_diag, np.diag([1.5, 0.0]))

    def test_single_follower(self, single_follower_topology):
        pair = laplacian(single_follower_topology)
        np.testing.assert_array_equal(pair.laplacian, [[0, 0], [-1, 1]])
        np.testing.assert_array_equal(pair.follower_block, [[1]])


@pytest.mark.unit
class TestSpanningTree:
    """Test cases for the leader-rooted spanning tree predicate."""

    def test_chain_has_tree(self):
        assert has_leader_rooted_spanning_tree(chain_topology(4))

    def test_isolated_follower(self):
        topology = build_topology([[0, 0, 0], [1, 0, 0], [0, 0, 0]])
        assert not has_leader_rooted_spanning_tree(topology)

    def test_cycle_without_leader_link(self):
        topology = build_topology([[0, 0, 0], [0, 0, 1], [0, 1, 0]])
        assert not has_leader_rooted_spanning_tree(topology)

    def test_direction_matters(self):
        """An edge leader -> follower is a[1, 0]; a[0, 1] points the other way."""
        assert not has_leader_rooted_spanning_tree(build_topology([[0, 1], [0, 0]]))
        assert has_leader_rooted_spanning_tree(build_topology([[0, 0], [1, 0]]))

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_matches_oracle_on_all_small_graphs(self, n):
        size = n + 1
        slots = [(i, j) for i in range(size) for j in range(size) if i != j]
        for bits in itertools.product((0.0, 1.0), repeat=len(slots)):
            a = np.zeros((size, size))
            for (i, j), bit in zip(slots, bits):
                a[i, j] = bit
            assert has_leader_rooted_spanning_tree(build_topology(a)) == bfs_reachable(a)


if __name__ == "__main__":
    pytest.main([__file__])
