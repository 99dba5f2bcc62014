#!/usr/bin/env python3
"""
Communication topology among the virtual leader (node 0) and N followers.

Edge semantics: ``a_ij > 0`` means node ``i`` receives node ``j``'s estimates.
"""

from collections import deque
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike

from .errors import NegativeWeightError, NonSquareMatrixError, SelfLoopError, TopologyError


@dataclass(frozen=True, eq=False)
class Topology:
    """Validated (N+1)x(N+1) non-negative weight matrix, node 0 = leader."""

    adjacency: np.ndarray
    _neighbors: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        neighbors = tuple(
            tuple(int(j) for j in np.flatnonzero(row > 0.0)) for row in self.adjacency
        )
        object.__setattr__(self, "_neighbors", neighbors)

    @property
    def n_followers(self) -> int:
        return self.adjacency.shape[0] - 1

    def neighbors(self, i: int) -> tuple[int, ...]:
        """In-neighbours of node ``i`` in ascending order."""
        return self._neighbors[i]

    def weight(self, i: int, j: int) -> float:
        return float(self.adjacency[i, j])

    def edges(self) -> list[tuple[int, int]]:
        """All ``(i, j)`` with ``a_ij > 0``, row-major."""
        return [(i, j) for i, row in enumerate(self._neighbors) for j in row]


@dataclass(frozen=True, eq=False)
class LaplacianPair:
    laplacian: np.ndarray
    follower_block: np.ndarray
    leader_gain_diag: np.ndarray


def build_topology(weights: ArrayLike) -> Topology:
    """Validate a weight matrix and wrap it in a read-only ``Topology``."""
    matrix = np.array(weights, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise NonSquareMatrixError(
            f"weight matrix must be square, got shape {matrix.shape}", matrix.shape
        )
    if matrix.shape[0] < 2:
        raise TopologyError("topology needs the leader and at least one follower")
    if not np.all(np.isfinite(matrix)):
        bad = tuple(int(k) for k in np.argwhere(~np.isfinite(matrix))[0])
        raise TopologyError(f"non-finite weight at {bad}", bad)

    negative = np.argwhere(matrix < 0.0)
    if negative.size:
        i, j = (int(k) for k in negative[0])
        raise NegativeWeightError(f"negative weight a[{i},{j}] = {matrix[i, j]}", (i, j))

    loops = np.flatnonzero(np.diag(matrix) != 0.0)
    if loops.size:
        i = int(loops[0])
        raise SelfLoopError(f"self-loop a[{i},{i}] = {matrix[i, i]}", (i, i))

    matrix.setflags(write=False)
    return Topology(matrix)


def laplacian(topology: Topology) -> LaplacianPair:
    """Graph Laplacian ``L = D - A`` with its follower block ``H`` and ``Psi``."""
    a = topology.adjacency
    lap = np.diag(a.sum(axis=1)) - a
    return LaplacianPair(
        laplacian=lap,
        follower_block=lap[1:, 1:].copy(),
        leader_gain_diag=np.diag(a[1:, 0]),
    )


def has_leader_rooted_spanning_tree(topology: Topology) -> bool:
    """True iff every follower is reachable from node 0 along j -> i edges."""
    a = topology.adjacency
    size = a.shape[0]
    seen = np.zeros(size, dtype=bool)
    seen[0] = True
    queue = deque([0])
    while queue:
        j = queue.popleft()
        for i in np.flatnonzero(a[:, j] > 0.0):
            if not seen[i]:
                seen[i] = True
                queue.append(int(i))
    return bool(seen.all())


def chain_topology(n_followers: int, weight: float = 1.0) -> Topology:
    """Leader -> 1 -> 2 -> ... -> N with uniform weights."""
    a = np.zeros((n_followers + 1, n_followers + 1))
    for i in range(1, n_followers + 1):
        a[i, i - 1] = weight
    return build_topology(a)
