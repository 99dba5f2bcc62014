#!/usr/bin/env python3
"""
First-layer cooperative estimator.

Each follower runs a distributed adaptive observer of the leader's state and
system matrix, fed only by the estimates of its in-neighbours:

    chi_hat_i' = A_hat_i chi_hat_i + beta1 * sum_j a_ij (chi_hat_j - chi_hat_i)
    A_hat_i'   = beta2 * sum_j a_ij (A_hat_j - A_hat_i)

Node 0 enters the sums with the leader's true ``(chi0, A0)``.
"""

from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from .dynamics import LeaderModel
from .errors import MissingNeighborDerivativeError, MissingNeighborError
from .graph import Topology

ObserverDerivative = tuple[np.ndarray, np.ndarray]


@dataclass(frozen=True, eq=False)
class ObserverState:
    chi_hat: np.ndarray
    A_hat: np.ndarray

    @classmethod
    def zeros(cls) -> "ObserverState":
        return cls(np.zeros(6), np.zeros((6, 6)))


@dataclass(frozen=True)
class ObserverGains:
    beta1: float
    beta2: float

    def __post_init__(self) -> None:
        if not (self.beta1 > 0.0 and self.beta2 > 0.0):
            raise ValueError(
                f"observer gains must be positive, got beta1={self.beta1}, beta2={self.beta2}"
            )


def observer_derivative(
    i: int,
    own: ObserverState,
    neighbor_states: Mapping[int, ObserverState],
    topology: Topology,
    gains: ObserverGains,
) -> ObserverDerivative:
    """``(chi_hat_dot, A_hat_dot)`` of follower ``i``.

    Only the in-neighbours of ``i`` are read from ``neighbor_states``; any other
    entry is ignored.
    """
    chi_sum = np.zeros(6)
    A_sum = np.zeros((6, 6))
    for j in topology.neighbors(i):
        try:
            neighbor = neighbor_states[j]
        except KeyError:
            raise MissingNeighborError(i, j) from None
        a_ij = topology.weight(i, j)
        chi_sum += a_ij * (neighbor.chi_hat - own.chi_hat)
        A_sum += a_ij * (neighbor.A_hat - own.A_hat)
    chi_hat_dot = own.A_hat @ own.chi_hat + gains.beta1 * chi_sum
    return chi_hat_dot, gains.beta2 * A_sum


def observer_second_derivative(
    i: int,
    derivatives: Mapping[int, ObserverDerivative],
    own: ObserverState,
    topology: Topology,
    gains: ObserverGains,
) -> np.ndarray:
    """Analytic ``chi_hat_i''`` from the first derivatives of this step.

    ``derivatives`` must hold node ``i`` itself and every in-neighbour; the
    leader's entry is ``(A0 chi0, 0)``.
    """
    try:
        chi_dot, A_dot = derivatives[i]
    except KeyError:
        raise MissingNeighborDerivativeError(i, i) from None
    coupling = np.zeros(6)
    for j in topology.neighbors(i):
        try:
            neighbor_chi_dot = derivatives[j][0]
        except KeyError:
            raise MissingNeighborDerivativeError(i, j) from None
        coupling += topology.weight(i, j) * (neighbor_chi_dot - chi_dot)
    return A_dot @ own.chi_hat + own.A_hat @ chi_dot + gains.beta1 * coupling


def leader_observer_entries(leader: LeaderModel) -> tuple[ObserverState, ObserverDerivative]:
    """Node-0 entries for the neighbour maps: true state and its derivative."""
    return (
        ObserverState(leader.chi0, leader.A0),
        (leader.A0 @ leader.chi0, np.zeros((6, 6))),
    )


def estimation_errors(
    states: Sequence[ObserverState], leader: LeaderModel
) -> tuple[np.ndarray, np.ndarray]:
    """Per-agent ``||chi_hat_i - chi0||`` and ``||A_hat_i - A0||_F``."""
    state_errors = np.array([np.linalg.norm(s.chi_hat - leader.chi0) for s in states])
    matrix_errors = np.array([np.linalg.norm(s.A_hat - leader.A0, "fro") for s in states])
    return state_errors, matrix_errors
