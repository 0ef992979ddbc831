import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.special import erf

from src.models.kernel import KernelKind, KernelSpec
from src.models.system import GenDampedSystem
from src.services.gendamp_service import (
    EXPERIMENT_C,
    EXPERIMENT_K,
    EXPERIMENT_M,
    integrate_kernel,
    kernel_cdf,
    kernel_eval,
    kernel_weight,
    lag_weights,
    make_linear_experiment_models,
    simulate_gendamp,
    step_count,
    white_noise_force,
)
from src.utils.errors import DefinitionError


def _experiment_system(kernel):
    return GenDampedSystem(M=EXPERIMENT_M, C=EXPERIMENT_C, K=EXPERIMENT_K, kernel=kernel)


def _viscous_oracle(t_eval, x0, v0):
    """Tight-tolerance reference for M x'' + C x' + K x = 0."""
    M, C, K = (np.array(a) for a in (EXPERIMENT_M, EXPERIMENT_C, EXPERIMENT_K))
    Minv = np.linalg.inv(M)

    def rhs(_, y):
        x, v = y[:2], y[2:]
        return np.concatenate([v, -Minv @ (C @ v + K @ x)])

    sol = solve_ivp(rhs, (0.0, t_eval[-1]), np.concatenate([x0, v0]), method="DOP853",
                    t_eval=t_eval, rtol=1e-11, atol=1e-12)
    return sol.y[:2].T


class TestKernels:

    def test_exponential_at_zero(self):
        assert kernel_eval(KernelSpec.exponential(1.5), 0.0) == pytest.approx(1.5)

    def test_rectangular_outside_support(self):
        assert kernel_eval(KernelSpec(KernelKind.RECTANGULAR, 2.0), 3.0) == 0.0

    def test_gaussian_at_zero(self):
        assert kernel_eval(KernelSpec.gaussian(1.5), 0.0) == pytest.approx(1.38198, abs=1e-5)

    def test_array_input(self):
        values = kernel_eval(KernelSpec.exponential(2.0), np.array([0.0, 1.0]))
        np.testing.assert_allclose(values, [2.0, 2.0 * np.exp(-2.0)])

    def test_dirac_not_pointwise(self):
        with pytest.raises(DefinitionError, match="not pointwise-evaluable"):
            kernel_eval(KernelSpec.dirac(), 0.0)

    def test_negative_time_rejected(self):
        with pytest.raises(DefinitionError):
            kernel_eval(KernelSpec.exponential(1.5), -0.1)

    @pytest.mark.parametrize("kind", [k for k in KernelKind if k is not KernelKind.DIRAC])
    def test_unit_integral(self, kind):
        kernel = KernelSpec(kind, 1.5)
        assert integrate_kernel(kernel, 0.0, 60.0) == pytest.approx(1.0, abs=1e-8)

    @pytest.mark.parametrize("kind", [k for k in KernelKind if k is not KernelKind.DIRAC])
    def test_closed_form_cdf_matches_quadrature(self, kind):
        kernel = KernelSpec(kind, 0.8)
        for t in (0.05, 0.4, 0.8, 1.7):
            assert kernel_cdf(kernel, t) == pytest.approx(integrate_kernel(kernel, 0.0, t), abs=1e-9)

    def test_parameter_validation(self):
        with pytest.raises(DefinitionError):
            KernelSpec(KernelKind.GAUSSIAN, 0.0)
        with pytest.raises(DefinitionError):
            KernelSpec(KernelKind.DIRAC, 1.0)

    def test_round_trip_dict(self):
        kernel = KernelSpec.gaussian(1.5)
        assert KernelSpec.from_dict(kernel.to_dict()) == kernel


class TestKernelWeights:

    def test_exponential_newest_interval(self):
        w = kernel_weight(KernelSpec.exponential(1.5), i=7, k=7, dt=0.01)
        assert w == pytest.approx(1 - np.exp(-0.015), abs=1e-7)
        assert w == pytest.approx(0.0148886, abs=1e-7)

    def test_rectangular_newest_interval(self):
        kernel = KernelSpec(KernelKind.RECTANGULAR, 0.05)
        assert kernel_weight(kernel, i=10, k=10, dt=0.01) == pytest.approx(0.2, abs=1e-12)

    def test_exponential_weights_telescope(self):
        dt, mu = 0.01, 1.5
        cumulative = np.cumsum(lag_weights(KernelSpec.exponential(mu), 4000, dt))
        k = np.arange(1, 4001)
        np.testing.assert_allclose(cumulative, 1 - np.exp(-mu * k * dt), rtol=0, atol=1e-10)

    def test_weight_sum_by_index(self):
        kernel, dt, k = KernelSpec.exponential(1.5), 0.01, 250
        total = sum(kernel_weight(kernel, i, k, dt) for i in range(1, k + 1))
        assert total == pytest.approx(1 - np.exp(-1.5 * k * dt), abs=1e-10)

    def test_gaussian_weights_match_erf(self):
        dt, mu = 0.01, 1.5
        cumulative = np.cumsum(lag_weights(KernelSpec.gaussian(mu), 4000, dt))
        k = np.arange(1, 4001)
        np.testing.assert_allclose(cumulative, erf(np.sqrt(mu) * k * dt), rtol=0, atol=1e-6)

    def test_weights_are_nonnegative(self):
        for kind in (KernelKind.RAISED_COSINE, KernelKind.TIMES_T_EXPONENTIAL, KernelKind.RECTANGULAR):
            assert np.all(lag_weights(KernelSpec(kind, 0.3), 200, 0.01) >= 0)

    def test_index_out_of_range(self):
        with pytest.raises(DefinitionError):
            kernel_weight(KernelSpec.exponential(1.5), i=0, k=3, dt=0.01)
        with pytest.raises(DefinitionError):
            kernel_weight(KernelSpec.exponential(1.5), i=4, k=3, dt=0.01)


class TestWhiteNoiseForce:

    def test_zero_variance(self):
        force = white_noise_force(2, 0.0, 0.01, 1.0, seed=3)
        np.testing.assert_array_equal(force.data, 0.0)

    def test_sample_variance(self):
        force = white_noise_force(1, 9.0, 0.01, 1000.0, seed=5)
        assert force.n_samples == 100_001
        assert 8.7 <= force.data.var() <= 9.3

    def test_deterministic(self):
        a = white_noise_force(2, 9.0, 0.01, 5.0, seed=1)
        b = white_noise_force(2, 9.0, 0.01, 5.0, seed=1)
        np.testing.assert_array_equal(a.data, b.data)
        assert a.channel_names == ["force_1", "force_2"]

    def test_step_count_must_divide(self):
        assert step_count(0.01, 40.0) == 4000
        with pytest.raises(DefinitionError, match="whole number"):
            step_count(0.03, 1.0)


class TestSimulateGendamp:

    def test_zero_force_zero_state(self):
        system = _experiment_system(KernelSpec.exponential(1.5))
        out = simulate_gendamp(system, None, [0, 0], [0, 0], 0.01, 2.0)
        np.testing.assert_array_equal(out.data, 0.0)
        assert out.n_samples == 201
        assert out.channel_names == ["disp_1", "vel_1", "accel_1", "disp_2", "vel_2", "accel_2"]

    def test_linear_in_force(self):
        system = _experiment_system(KernelSpec.gaussian(1.5))
        force = white_noise_force(2, 9.0, 0.01, 3.0, seed=2)
        once = simulate_gendamp(system, force, [0, 0], [0, 0], 0.01, 3.0)
        twice = simulate_gendamp(system, force.with_data(2 * force.data), [0, 0], [0, 0], 0.01, 3.0)
        np.testing.assert_allclose(twice.data, 2 * once.data, rtol=1e-10, atol=1e-12)

    def test_dirac_kernel_matches_viscous_oracle(self):
        x0, v0 = np.array([1.0, 1.0]), np.array([0.0, 0.5])
        out = simulate_gendamp(_experiment_system(KernelSpec.dirac()), None, x0, v0, 0.01, 40.0)
        reference = _viscous_oracle(out.times(), x0, v0)
        simulated = np.column_stack([out.values("disp_1"), out.values("disp_2")])
        assert np.max(np.abs(simulated - reference)) <= 1e-3

    def test_initial_conditions_kept(self):
        out = simulate_gendamp(_experiment_system(KernelSpec.exponential(1.5)), None, [1, 1], [0, 0.5], 0.01, 1.0)
        assert out.values("disp_1")[0] == 1.0
        assert out.values("vel_2")[0] == 0.5

    def test_exponential_kernel_dissipates(self):
        """Mechanical energy plus the energy held by the exponential memory never grows."""
        mu, dt = 1.5, 0.01
        M, C, K = (np.array(a) for a in (EXPERIMENT_M, EXPERIMENT_C, EXPERIMENT_K))
        out = simulate_gendamp(_experiment_system(KernelSpec.exponential(mu)), None, [1, 1], [0, 0.5], dt, 40.0)
        x = np.column_stack([out.values("disp_1"), out.values("disp_2")])
        v = np.column_stack([out.values("vel_1"), out.values("vel_2")])
        a = np.column_stack([out.values("accel_1"), out.values("accel_2")])
        # C w = -M a - K x with zero force
        w = np.linalg.solve(C, -(a @ M.T + x @ K.T).T).T

        mechanical = 0.5 * np.einsum("ti,ij,tj->t", v, M, v) + 0.5 * np.einsum("ti,ij,tj->t", x, K, x)
        stored = np.einsum("ti,ij,tj->t", w, C, w) / (2 * mu)
        total = mechanical + stored
        assert np.all(np.diff(total) <= 1e-4 * total[0])

        peaks = mechanical[1:-1][(mechanical[1:-1] >= mechanical[:-2]) & (mechanical[1:-1] >= mechanical[2:])]
        assert peaks[-1] < 0.05 * mechanical[0]

    def test_force_shape_checked(self):
        system = _experiment_system(KernelSpec.exponential(1.5))
        force = white_noise_force(1, 1.0, 0.01, 1.0, seed=0)
        with pytest.raises(DefinitionError, match="channels"):
            simulate_gendamp(system, force, [0, 0], [0, 0], 0.01, 1.0)

    def test_force_too_short(self):
        system = _experiment_system(KernelSpec.exponential(1.5))
        force = white_noise_force(2, 1.0, 0.01, 1.0, seed=0)
        with pytest.raises(DefinitionError, match="samples"):
            simulate_gendamp(system, force, [0, 0], [0, 0], 0.01, 2.0)


class TestExperimentModels:

    def test_three_models(self):
        a, b, c = make_linear_experiment_models()
        assert a.kernel == KernelSpec.exponential(1.5)
        assert b.kernel == KernelSpec.gaussian(1.5)
        assert c.kernel.is_dirac
        np.testing.assert_array_equal(a.K, EXPERIMENT_K)
        assert [m.name for m in (a, b, c)] == ["A", "B", "C"]

    def test_mass_must_be_positive_definite(self):
        with pytest.raises(DefinitionError):
            GenDampedSystem(M=[[0.0]], C=[[1.0]], K=[[1.0]], kernel=KernelSpec.dirac())
