import numpy as np
import pytest

from src.models.signal import TimeSeries
from src.models.system import RayleighBuilding, shear_matrices
from src.services.newmark_service import newmark_linear, simulate_rayleigh_building
from src.services.nonlinear_service import synth_ground_motion
from src.utils.errors import DefinitionError


def _record(values, dt=0.02):
    return TimeSeries.from_channels(dt, {"ground_accel": ("m/s^2", values)})


class TestNewmarkLinear:

    def test_step_load_matches_closed_form(self):
        m, k, zeta, p, dt = 1.0, 100.0, 0.05, 2.0, 0.001
        omega = np.sqrt(k / m)
        c = 2 * zeta * omega * m
        t = np.arange(0, 3 + dt / 2, dt)
        forces = np.full((t.size, 1), p)
        x, v, a = newmark_linear(np.array([[m]]), np.array([[c]]), np.array([[k]]), forces, dt)

        wd = omega * np.sqrt(1 - zeta ** 2)
        exact = p / k * (1 - np.exp(-zeta * omega * t) * (np.cos(wd * t) + zeta / np.sqrt(1 - zeta ** 2) * np.sin(wd * t)))
        np.testing.assert_allclose(x[:, 0], exact, atol=5e-4 * p / k)
        assert a[0, 0] == pytest.approx(p / m)

    def test_undamped_free_vibration_keeps_energy(self):
        M, K = np.diag([1.0, 2.0]), np.array([[30.0, -10.0], [-10.0, 10.0]])
        forces = np.zeros((2001, 2))
        forces[0] = [5.0, 0.0]
        forces[1] = [5.0, 0.0]
        x, v, _ = newmark_linear(M, np.zeros((2, 2)), K, forces, 0.01)
        energy = 0.5 * np.einsum("ti,ij,tj->t", v, M, v) + 0.5 * np.einsum("ti,ij,tj->t", x, K, x)
        # load is off from the second step on
        np.testing.assert_allclose(energy[2:], energy[2], rtol=1e-10)

    def test_zero_load_stays_at_rest(self):
        x, v, a = newmark_linear(np.eye(2), np.eye(2), 4 * np.eye(2), np.zeros((50, 2)), 0.01)
        assert not x.any() and not v.any() and not a.any()


class TestRayleighBuilding:

    def test_damping_matrix(self):
        building = RayleighBuilding(alpha_m=0.5, alpha_k=0.002, stories=2, m=1.0, k=900.0)
        M, C, K = building.matrices()
        np.testing.assert_allclose(K, [[1800.0, -900.0], [-900.0, 900.0]])
        np.testing.assert_allclose(C, 0.5 * M + 0.002 * K)

    def test_shear_matrices_single_story(self):
        M, K = shear_matrices(np.array([2.0]), np.array([5.0]))
        np.testing.assert_array_equal(M, [[2.0]])
        np.testing.assert_array_equal(K, [[5.0]])

    def test_at_rest_without_ground_motion(self):
        out = simulate_rayleigh_building(RayleighBuilding(alpha_m=0.5), _record(np.zeros(201)))
        np.testing.assert_array_equal(out.data, 0.0)
        assert out.channel_names == ["disp_1", "vel_1", "accel_1", "disp_2", "vel_2", "accel_2"]

    def test_stiffness_damping_changes_response(self):
        record = synth_ground_motion(seed=4, duration=10.0, dt=0.02, peak_accel=3.0)
        a = simulate_rayleigh_building(RayleighBuilding(alpha_m=0.5, alpha_k=0.0), record)
        b = simulate_rayleigh_building(RayleighBuilding(alpha_m=0.5, alpha_k=0.002), record)
        assert np.all(np.isfinite(a.data)) and np.all(np.isfinite(b.data))
        assert np.max(np.abs(a.values("accel_2") - b.values("accel_2"))) > 1e-3

    def test_total_acceleration_adds_ground(self):
        record = synth_ground_motion(seed=2, duration=4.0, dt=0.02, peak_accel=3.0)
        building = RayleighBuilding(alpha_m=0.5)
        relative = simulate_rayleigh_building(building, record)
        total = simulate_rayleigh_building(building, record, total_accel=True)
        np.testing.assert_allclose(total.values("accel_1") - relative.values("accel_1"), record.values(), atol=1e-12)

    def test_negative_coefficients_rejected(self):
        with pytest.raises(DefinitionError):
            RayleighBuilding(alpha_m=-0.1)
