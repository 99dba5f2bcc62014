#!/usr/bin/env python3
"""
Test suite for vehicle and leader dynamics.
"""

import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from auv_formation.dynamics import (
    AgentState,
    LeaderModel,
    VehicleParams,
    coriolis_matrix,
    damping_matrix,
    leader_closed_form_default,
    leader_derivative,
    mass_matrix,
    reference_leader,
    reference_leader_matrix,
    rotation,
    rotation_rate,
    uncertainty,
    vehicle_derivative,
)
from auv_formation.errors import NotPositiveDefiniteError, UnknownUncertaintyIdError


@pytest.mark.unit
class TestMassMatrix:
    """Test cases for the inertia matrix."""

    def test_first_vehicle_entries(self, fleet_params):
        M = mass_matrix(fleet_params[0])
        assert M[0, 0] == pytest.approx(25.0)
        assert M[1, 1] == pytest.approx(33.0)
        assert M[1, 2] == pytest.approx(23.0 * 0.05)
        assert M[2, 1] == M[1, 2]
        assert M[2, 2] == pytest.approx(2.8)

    def test_every_reference_vehicle_is_spd(self, fleet_params):
        for p in fleet_params:
            M = mass_matrix(p)
            np.testing.assert_array_equal(M, M.T)
            assert np.all(np.linalg.eigvalsh(M) > 0.0)

    def test_indefinite_rejected(self):
        p = VehicleParams(m=1.0, I_z=0.01, x_g=5.0)
        with pytest.raises(NotPositiveDefiniteError) as info:
            mass_matrix(p)
        assert info.value.eigenvalues is not None


@pytest.mark.unit
class TestCoriolisAndDamping:
    """Test cases for C(nu) and D(nu)."""

    def test_coriolis_vanishes_at_rest(self, fleet_params):
        np.testing.assert_array_equal(coriolis_matrix(fleet_params[0], [0, 0, 0]), 0.0)

    def test_skew_variant_is_skew_symmetric(self, fleet_params):
        C = coriolis_matrix(fleet_params[2], [1.2, -0.4, 0.3], "skew")
        np.testing.assert_allclose(C, -C.T, atol=1e-12)

    def test_reference_variant_differs_only_in_c32(self, fleet_params):
        p, nu = fleet_params[1], [1.0, 0.5, -0.2]
        reference = coriolis_matrix(p, nu, "reference")
        skew = coriolis_matrix(p, nu, "skew")
        diff = reference - skew
        assert diff[2, 1] == pytest.approx(-2.0 * (p.m - p.X_du) * 1.0)
        diff[2, 1] = 0.0
        np.testing.assert_array_equal(diff, 0.0)

    def test_unknown_variant(self, fleet_params):
        with pytest.raises(ValueError):
            coriolis_matrix(fleet_params[0], [0, 0, 0], "other")

    def test_damping_at_rest_is_linear_part(self, fleet_params):
        p = fleet_params[0]
        D = damping_matrix(p, [0, 0, 0])
        assert D[0, 0] == pytest.approx(0.8)
        assert D[1, 1] == pytest.approx(0.9)
        assert D[1, 2] == pytest.approx(-0.1)
        assert D[2, 1] == pytest.approx(-0.1)

    def test_damping_uses_absolute_velocity(self, fleet_params):
        p = fleet_params[0]
        np.testing.assert_array_equal(damping_matrix(p, [1, -2, 3]), damping_matrix(p, [-1, 2, -3]))


@pytest.mark.unit
class TestUncertainty:
    """Test cases for the unmodelled dynamics."""

    def test_first_vehicle_has_none(self, fleet_params):
        np.testing.assert_array_equal(uncertainty(fleet_params[0], np.ones(6)), 0.0)

    def test_second_vehicle_formula(self, fleet_params):
        chi = [0, 0, 0, 2.0, 1.0, -0.5]
        np.testing.assert_allclose(
            uncertainty(fleet_params[1], chi), [0.2 * 4 + 0.3, -0.95, 0.33 * 0.5]
        )

    def test_fifth_vehicle_formula(self, fleet_params):
        chi = [0, 0, 0, 0.3, 0.2, 0.1]
        np.testing.assert_allclose(
            uncertainty(fleet_params[4], chi), [math.sin(0.2), math.cos(0.4), -0.65]
        )

    def test_unknown_id(self):
        with pytest.raises(UnknownUncertaintyIdError) as info:
            uncertainty(VehicleParams(m=10.0, I_z=1.0, uncertainty_id=9), np.zeros(6))
        assert info.value.uncertainty_id == 9


@pytest.mark.unit
class TestRotation:
    """Test cases for J(psi) and its derivative."""

    def test_orthogonality(self):
        rng = np.random.default_rng(11)
        for psi in rng.uniform(-20.0, 20.0, 1000):
            J = rotation(float(psi))
            assert np.abs(J.T @ J - np.eye(3)).max() <= 1e-12
            assert np.linalg.det(J) == pytest.approx(1.0, abs=1e-12)

    def test_identity_at_zero(self):
        np.testing.assert_array_equal(rotation(0.0), np.eye(3))

    def test_rate_matches_finite_difference(self):
        psi, r, h = 0.7, -0.4, 1e-6
        numeric = (rotation(psi + r * h) - rotation(psi - r * h)) / (2 * h)
        np.testing.assert_allclose(rotation_rate(psi, r), numeric, atol=1e-8)


@pytest.mark.unit
class TestVehicleDerivative:
    """Test cases for the vehicle state derivative."""

    def test_rest_without_force(self, fleet_params):
        eta_dot, nu_dot = vehicle_derivative(
            fleet_params[0], AgentState(np.zeros(3), np.zeros(3)), np.zeros(3)
        )
        np.testing.assert_array_equal(eta_dot, 0.0)
        np.testing.assert_array_equal(nu_dot, 0.0)

    def test_pure_surge_force(self, fleet_params):
        p = fleet_params[0]
        _, nu_dot = vehicle_derivative(p, AgentState(np.zeros(3), np.zeros(3)), [5.0, 0.0, 0.0])
        np.testing.assert_allclose(nu_dot, [5.0 / 25.0, 0.0, 0.0], atol=1e-15)

    def test_kinematics_rotate_velocity(self, fleet_params):
        s = AgentState(np.array([0.0, 0.0, math.pi / 2]), np.array([1.0, 0.0, 0.0]))
        eta_dot, _ = vehicle_derivative(fleet_params[0], s, np.zeros(3))
        np.testing.assert_allclose(eta_dot, rotation(math.pi / 2) @ [1.0, 0.0, 0.0])

    def test_restoring_force_is_subtracted(self, fleet_params):
        p = fleet_params[0]
        s = AgentState(np.zeros(3), np.zeros(3))
        _, nu_dot = vehicle_derivative(
            p, s, np.zeros(3), restoring=lambda eta: np.array([2.5, 0, 0])
        )
        assert nu_dot[0] == pytest.approx(-2.5 / 25.0)


@pytest.mark.unit
class TestLeader:
    """Test cases for the virtual leader."""

    def test_default_leader_derivative(self):
        leader = LeaderModel(reference_leader_matrix(), np.array([0, 80, 0, 80, 0, 80.0]))
        np.testing.assert_array_equal(leader_derivative(leader), [80, 0, 80, 0, 80, 0])

    def test_zero_state(self):
        leader = LeaderModel(reference_leader_matrix(), np.zeros(6))
        np.testing.assert_array_equal(leader_derivative(leader), 0.0)

    def test_reference_matrix_is_marginally_stable(self):
        assert reference_leader().is_marginally_stable()
        unstable = LeaderModel(np.eye(6), np.zeros(6))
        assert not unstable.is_marginally_stable()

    def test_closed_form_at_zero(self):
        np.testing.assert_array_equal(leader_closed_form_default(0.0), [0, 80, 0, 80, 0, 80])

    def test_closed_form_at_quarter_period(self):
        np.testing.assert_allclose(
            leader_closed_form_default(math.pi / 2), [80, 0, 80, 0, 80, 0], atol=1e-12
        )

    def test_closed_form_satisfies_leader_equation(self):
        A0 = reference_leader_matrix()
        t, h = 1.3, 1e-6
        numeric = (leader_closed_form_default(t + h) - leader_closed_form_default(t - h)) / (2 * h)
        np.testing.assert_allclose(numeric, A0 @ leader_closed_form_default(t), atol=1e-6)


if __name__ == "__main__":
    pytest.main([__file__])
