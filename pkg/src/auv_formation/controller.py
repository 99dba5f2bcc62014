#!/usr/bin/env python3
"""
Second-layer decentralized deterministic-learning (DDL) controller.

Backstepping on the estimated reference ``eta_hat_d = eta_hat_0 + d*``:

    z1    = eta - eta_hat_d
    alpha = J^T (-K1 z1 + eta_hat_d_dot)
    z2    = nu - alpha
    tau   = -J^T z1 - K2 z2 + W^T S(Z)

with sigma-modification weight adaptation
``W_k' = -Gamma_k (S(Z) z2_k + sigma_k W_k)``. The pretrained law replaces the
adaptive weights by constants and never adapts.

Everything here reads only the agent's own signals.
"""

import warnings
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike

from .dynamics import (
    AgentState,
    RestoringForce,
    VehicleParams,
    coriolis_matrix,
    damping_matrix,
    mass_matrix,
    rotation,
    rotation_rate,
    uncertainty,
    zero_restoring,
)
from .errors import GainRelationWarning, NotPositiveDefiniteError
from .rbf import RbfNetwork, nn_output, regressor


def _check_spd(name: str, K: np.ndarray) -> None:
    if K.shape != (3, 3):
        raise ValueError(f"{name} must be 3x3, got {K.shape}")
    if not np.allclose(K, K.T, rtol=0.0, atol=1e-12 * max(1.0, float(np.abs(K).max()))):
        raise NotPositiveDefiniteError(f"{name} is not symmetric")
    eigenvalues = np.linalg.eigvalsh(K)
    if not np.all(eigenvalues > 0.0):
        raise NotPositiveDefiniteError(f"{name} is not positive definite", eigenvalues)


def _per_channel(name: str, value: float | Sequence[float]) -> np.ndarray:
    try:
        arr = np.broadcast_to(np.asarray(value, dtype=float), (3,)).copy()
    except ValueError:
        raise ValueError(f"{name} must be a scalar or 3 values, got {value!r}") from None
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ControllerGains:
    """Backstepping gains and adaptation constants of one agent.

    ``gamma`` and ``sigma`` are per output channel (a scalar is broadcast).
    ``sigma = 0`` switches the leakage term off.
    """

    K1: np.ndarray
    K2: np.ndarray
    gamma: np.ndarray
    sigma: np.ndarray

    @classmethod
    def build(
        cls,
        K1: ArrayLike,
        K2: ArrayLike,
        gamma: float | Sequence[float],
        sigma: float | Sequence[float],
    ) -> "ControllerGains":
        K1_arr = np.array(K1, dtype=float)
        K2_arr = np.array(K2, dtype=float)
        _check_spd("K1", K1_arr)
        _check_spd("K2", K2_arr)
        gamma_arr = _per_channel("gamma", gamma)
        sigma_arr = _per_channel("sigma", sigma)
        if not np.all(gamma_arr > 0.0):
            raise ValueError(f"gamma must be positive, got {gamma_arr}")
        if not np.all(sigma_arr >= 0.0):
            raise ValueError(f"sigma must be non-negative, got {sigma_arr}")
        K1_arr.setflags(write=False)
        K2_arr.setflags(write=False)
        return cls(K1_arr, K2_arr, gamma_arr, sigma_arr)

    def satisfies_gain_relation(self) -> bool:
        return bool(np.linalg.eigvalsh(self.K2).min() > 2.0 * np.linalg.eigvalsh(self.K1).max())


def gain_relation_message(gains: ControllerGains, agent: int | None = None) -> str | None:
    """Description of a ``lambda_min(K2) > 2 lambda_max(K1)`` violation, if any."""
    if gains.satisfies_gain_relation():
        return None
    who = "" if agent is None else f"agent {agent}: "
    return (
        f"{who}lambda_min(K2)={np.linalg.eigvalsh(gains.K2).min():g} is not above "
        f"2*lambda_max(K1)={2.0 * np.linalg.eigvalsh(gains.K1).max():g}"
    )


def check_gain_relation(gains: ControllerGains, agent: int | None = None) -> bool:
    """Warn (never fail) when the gain relation is violated."""
    message = gain_relation_message(gains, agent)
    if message is None:
        return True
    warnings.warn(message, GainRelationWarning, stacklevel=2)
    return False


@dataclass(frozen=True, eq=False)
class FormationOffsets:
    """Desired offset ``d*_i`` of every follower from the leader pose."""

    d_star: np.ndarray

    def __post_init__(self) -> None:
        if self.d_star.ndim != 2 or self.d_star.shape[1] != 3:
            raise ValueError(f"offsets must be N x 3, got {self.d_star.shape}")
        if not np.all(np.isfinite(self.d_star)):
            raise ValueError("offsets must be finite")

    def __getitem__(self, i: int) -> np.ndarray:
        """Offset of follower ``i`` (1-based, matching graph node numbers)."""
        return self.d_star[i - 1]


def backstepping_errors(
    s: AgentState,
    eta_hat_d: np.ndarray,
    eta_hat_d_dot: np.ndarray,
    gains: ControllerGains,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(z1, alpha, z2)`` for the estimated reference."""
    z1 = s.eta - eta_hat_d
    alpha = rotation(float(s.eta[2])).T @ (-gains.K1 @ z1 + eta_hat_d_dot)
    return z1, alpha, s.nu - alpha


def alpha_dot(
    s: AgentState,
    z1: np.ndarray,
    eta_hat_d_dot: np.ndarray,
    eta_hat_d_ddot: np.ndarray,
    gains: ControllerGains,
) -> np.ndarray:
    """Analytic derivative of the virtual control."""
    psi, r = float(s.eta[2]), float(s.nu[2])
    J = rotation(psi)
    J_dot = rotation_rate(psi, r)
    K1 = gains.K1
    return J_dot.T @ (-K1 @ z1 + eta_hat_d_dot) + J.T @ (
        K1 @ eta_hat_d_dot - K1 @ (J @ s.nu) + eta_hat_d_ddot
    )


def ddl_control(
    z1: np.ndarray,
    z2: np.ndarray,
    psi: float,
    net: RbfNetwork,
    Z: np.ndarray,
    gains: ControllerGains,
    regressor_value: np.ndarray | None = None,
) -> np.ndarray:
    """DDL feedback ``tau = -J^T z1 - K2 z2 + W^T S(Z)``."""
    return -rotation(psi).T @ z1 - gains.K2 @ z2 + nn_output(net, Z, regressor_value)


def pretrained_control(
    z1: np.ndarray,
    z2: np.ndarray,
    psi: float,
    frozen_net: RbfNetwork,
    Z: np.ndarray,
    gains: ControllerGains,
    regressor_value: np.ndarray | None = None,
) -> np.ndarray:
    """Same feedback with constant learned weights; nothing adapts."""
    return ddl_control(z1, z2, psi, frozen_net, Z, gains, regressor_value)


def adaptation_derivative(
    net: RbfNetwork,
    Z: np.ndarray,
    z2: np.ndarray,
    gains: ControllerGains,
    regressor_value: np.ndarray | None = None,
) -> np.ndarray:
    """Sigma-modification law, one row per output channel."""
    S = regressor(net, Z) if regressor_value is None else regressor_value
    gamma = gains.gamma[:, None]
    return -gamma * (np.outer(z2, S) + gains.sigma[:, None] * net.weights)


def true_nonlinearity_oracle(
    p: VehicleParams,
    s: AgentState,
    alpha_dot_value: np.ndarray,
    restoring: RestoringForce = zero_restoring,
    coriolis: str = "reference",
    M: np.ndarray | None = None,
) -> np.ndarray:
    """Ground-truth ``F = M alpha_dot + C nu + D nu + g + Delta`` the network learns.

    Simulator side only: it uses parameters the controller never sees.
    """
    if M is None:
        M = mass_matrix(p)
    nu = s.nu
    return (
        M @ alpha_dot_value
        + coriolis_matrix(p, nu, coriolis) @ nu
        + damping_matrix(p, nu) @ nu
        + restoring(s.eta)
        + uncertainty(p, s.chi)
    )
