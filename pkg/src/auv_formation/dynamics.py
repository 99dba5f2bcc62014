#!/usr/bin/env python3
"""
Continuous-time models for the formation simulator.

This module holds the 3-DOF horizontal-plane vehicle model

    eta_dot = J(psi) nu
    M nu_dot + C(nu) nu + D(nu) nu + g(eta) + Delta(chi) = tau

with heterogeneous hydrodynamic parameters, and the virtual leader
``chi0_dot = A0 chi0``. Everything is SI with angles in radians; the heading
is kept unwrapped.
"""

import math
from collections.abc import Callable
from dataclasses import dataclass, fields
from typing import Any

import numpy as np
from numpy.typing import ArrayLike

from .errors import NotPositiveDefiniteError, UnknownUncertaintyIdError

RestoringForce = Callable[[np.ndarray], np.ndarray]

CORIOLIS_VARIANTS = ("reference", "skew")


@dataclass(frozen=True)
class VehicleParams:
    """Physical and hydrodynamic constants of one vehicle.

    Added-mass terms use the usual derivative notation: ``X_du`` is the surge
    force per unit surge acceleration, ``Y_dr`` the sway force per unit yaw
    acceleration, and so on. Linear and quadratic damping follow the same
    naming (``Y_rv`` multiplies ``|r|`` in the sway equation).
    """

    m: float
    I_z: float
    x_g: float = 0.0
    X_du: float = 0.0
    Y_dv: float = 0.0
    Y_dr: float = 0.0
    N_dr: float = 0.0
    X_u: float = 0.0
    Y_v: float = 0.0
    Y_r: float = 0.0
    N_v: float = 0.0
    N_r: float = 0.0
    X_uu: float = 0.0
    Y_vv: float = 0.0
    Y_rv: float = 0.0
    Y_vr: float = 0.0
    Y_rr: float = 0.0
    N_vv: float = 0.0
    N_rv: float = 0.0
    N_vr: float = 0.0
    N_rr: float = 0.0
    uncertainty_id: int = 1

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def to_dict(self) -> dict[str, Any]:
        return {name: getattr(self, name) for name in self.field_names()}


@dataclass(frozen=True, eq=False)
class AgentState:
    """True pose ``eta = [x, y, psi]`` and body velocity ``nu = [u, v, r]``."""

    eta: np.ndarray
    nu: np.ndarray

    @classmethod
    def from_chi(cls, chi: ArrayLike) -> "AgentState":
        chi = np.asarray(chi, dtype=float)
        return cls(chi[:3], chi[3:6])

    @property
    def chi(self) -> np.ndarray:
        return np.concatenate((self.eta, self.nu))


@dataclass(frozen=True, eq=False)
class LeaderModel:
    """Virtual leader ``chi0_dot = A0 chi0`` with ``chi0 = [eta0, nu0]``."""

    A0: np.ndarray
    chi0: np.ndarray

    def is_marginally_stable(self, tolerance: float = 1e-9) -> bool:
        """All eigenvalues of ``A0`` on the imaginary axis."""
        eigenvalues = np.linalg.eigvals(self.A0)
        return bool(np.all(np.abs(eigenvalues.real) <= tolerance))


def mass_matrix(p: VehicleParams) -> np.ndarray:
    """Rigid-body plus added-mass inertia matrix."""
    m11 = p.m - p.X_du
    m22 = p.m - p.Y_dv
    m23 = p.m * p.x_g - p.Y_dr
    m33 = p.I_z - p.N_dr
    M = np.array([[m11, 0.0, 0.0], [0.0, m22, m23], [0.0, m23, m33]])
    eigenvalues = np.linalg.eigvalsh(M)
    if not np.all(eigenvalues > 0.0):
        raise NotPositiveDefiniteError(
            f"mass matrix is not positive definite (eigenvalues {eigenvalues})",
            eigenvalues,
        )
    return M


def coriolis_matrix(
    p: VehicleParams, nu: ArrayLike, variant: str = "reference"
) -> np.ndarray:
    """Coriolis/centripetal matrix.

    ``variant="reference"`` uses ``C32 = -m11 u``, the model the reference fleet
    is tuned with; ``"skew"`` uses ``+m11 u``, which makes C skew-symmetric.
    """
    u, v, r = (float(x) for x in nu)
    m11 = p.m - p.X_du
    m22 = p.m - p.Y_dv
    m23 = p.m * p.x_g - p.Y_dr
    c13 = -m22 * v - m23 * r
    c23 = -m11 * u
    if variant == "reference":
        c32 = -m11 * u
    elif variant == "skew":
        c32 = m11 * u
    else:
        raise ValueError(f"unknown Coriolis variant {variant!r}")
    return np.array([[0.0, 0.0, c13], [0.0, 0.0, c23], [-c13, c32, 0.0]])


def damping_matrix(p: VehicleParams, nu: ArrayLike) -> np.ndarray:
    """Linear plus quadratic hydrodynamic damping."""
    u, v, r = (abs(float(x)) for x in nu)
    d11 = -(p.X_u + p.X_uu * u)
    d22 = -(p.Y_v + p.Y_vv * v + p.Y_rv * r)
    d23 = -(p.Y_r + p.Y_vr * v + p.Y_rr * r)
    d32 = -(p.N_v + p.N_vv * v + p.N_rv * r)
    d33 = -(p.N_r + p.N_vr * v + p.N_rr * r)
    return np.array([[d11, 0.0, 0.0], [0.0, d22, d23], [0.0, d32, d33]])


Scalar = np.float64


def _delta_1(u: Scalar, v: Scalar, r: Scalar) -> tuple[float, float, float]:
    return (0.0, 0.0, 0.0)


def _delta_2(u: Scalar, v: Scalar, r: Scalar) -> tuple[float, float, float]:
    return (0.2 * u**2 + 0.3 * v, -0.95, 0.33 * abs(r))


def _delta_3(u: Scalar, v: Scalar, r: Scalar) -> tuple[float, float, float]:
    return (-0.58 + np.cos(v), 0.23 * r**3, 0.74 * u**2)


def _delta_4(u: Scalar, v: Scalar, r: Scalar) -> tuple[float, float, float]:
    return (-0.31, 0.0, 0.38 * u**2 + v**3)


def _delta_5(u: Scalar, v: Scalar, r: Scalar) -> tuple[float, float, float]:
    return (np.sin(v), np.cos(u + r), -0.65)


UNCERTAINTIES: dict[int, Callable[[Scalar, Scalar, Scalar], tuple[float, float, float]]] = {
    1: _delta_1,
    2: _delta_2,
    3: _delta_3,
    4: _delta_4,
    5: _delta_5,
}


def uncertainty(p: VehicleParams, chi: ArrayLike) -> np.ndarray:
    """Deterministic unmodelled dynamics ``Delta(chi)`` for the vehicle's id.

    The formulas see numpy scalars, so a runaway velocity gives ``inf`` rather
    than an ``OverflowError``.
    """
    formula = UNCERTAINTIES.get(p.uncertainty_id)
    if formula is None:
        raise UnknownUncertaintyIdError(p.uncertainty_id)
    chi = np.asarray(chi, dtype=float)
    u, v, r = chi[3:6]
    return np.array(formula(u, v, r), dtype=float)


def rotation(psi: float) -> np.ndarray:
    """Rotation matrix ``J(psi)`` exactly as used in the kinematics."""
    c, s = math.cos(psi), math.sin(psi)
    return np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_rate(psi: float, r: float) -> np.ndarray:
    """Time derivative of ``J(psi)`` for yaw rate ``r``."""
    c, s = math.cos(psi), math.sin(psi)
    return r * np.array([[-s, c, 0.0], [-c, -s, 0.0], [0.0, 0.0, 0.0]])


def zero_restoring(eta: np.ndarray) -> np.ndarray:
    return np.zeros(3)


def vehicle_derivative(
    p: VehicleParams,
    s: AgentState,
    tau: ArrayLike,
    restoring: RestoringForce = zero_restoring,
    coriolis: str = "reference",
    M: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """State derivative ``(eta_dot, nu_dot)`` of one vehicle.

    ``M`` may be passed in to skip re-validating the mass matrix every call.
    """
    if M is None:
        M = mass_matrix(p)
    nu = s.nu
    eta_dot = rotation(float(s.eta[2])) @ nu
    rhs = (
        np.asarray(tau, dtype=float)
        - coriolis_matrix(p, nu, coriolis) @ nu
        - damping_matrix(p, nu) @ nu
        - restoring(s.eta)
        - uncertainty(p, s.chi)
    )
    return eta_dot, np.linalg.solve(M, rhs)


def leader_derivative(leader: LeaderModel) -> np.ndarray:
    return leader.A0 @ leader.chi0


def leader_closed_form(t: float, amplitude: float) -> np.ndarray:
    """Closed-form leader state for the block-rotation ``A0`` of the reference fleet.

    ``eta0 = a [sin t, cos t, sin t]`` and ``nu0 = B eta0_dot`` with
    ``B = diag(1, -1, 1)``, i.e. ``nu0 = a [cos t, sin t, cos t]``.
    """
    s, c = math.sin(t), math.cos(t)
    return amplitude * np.array([s, c, s, c, s, c])


def leader_closed_form_default(t: float) -> np.ndarray:
    return leader_closed_form(t, 80.0)


def reference_leader_matrix() -> np.ndarray:
    """``A0 = [[0, B], [-B, 0]]`` with ``B = diag(1, -1, 1)``."""
    B = np.diag([1.0, -1.0, 1.0])
    zero = np.zeros((3, 3))
    return np.block([[zero, B], [-B, zero]])


def reference_leader(amplitude: float = 80.0) -> LeaderModel:
    """Leader whose trajectory is ``leader_closed_form(t, amplitude)``."""
    return LeaderModel(reference_leader_matrix(), leader_closed_form(0.0, amplitude))
