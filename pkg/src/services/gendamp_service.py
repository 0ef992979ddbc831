"""
Linear systems with convolution damping, stepped with the average-acceleration
scheme for integro-differential equations of motion.

The state stack is z = [a, v, w, x] (acceleration, velocity, convolution
term, displacement), each block n long, and every step solves

    L z_k = R z_{k-1} + u_k,    u_k = [f_k, 0, 0, f_w]

with the i = k quadrature weight on the left and the older history folded
into f_w.
"""
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.integrate import quad
from scipy.special import erf

from src.models.kernel import KernelKind, KernelSpec
from src.models.signal import UNIT_FORCE, Channel, TimeSeries
from src.models.system import GenDampedSystem
from src.services.signal_service import response_series
from src.utils.errors import DefinitionError, NumericalError

QUAD_TOL = 1e-10
COND_LIMIT = 1e14


def _g_exponential(mu, t):
    return mu * np.exp(-mu * t)


def _g_times_t_exponential(mu, t):
    return mu ** 2 * t * np.exp(-mu * t)


def _g_gaussian(mu, t):
    return 2.0 * np.sqrt(mu / np.pi) * np.exp(-mu * t ** 2)


def _g_rectangular(mu, t):
    return np.where(t <= mu, 1.0 / mu, 0.0)


def _g_raised_cosine(mu, t):
    return np.where(t <= mu, (1.0 + np.cos(np.pi * t / mu)) / mu, 0.0)


def _G_exponential(mu, t):
    return -np.expm1(-mu * t)


def _G_times_t_exponential(mu, t):
    return -np.expm1(-mu * t) - mu * t * np.exp(-mu * t)


def _G_gaussian(mu, t):
    return erf(np.sqrt(mu) * t)


def _G_rectangular(mu, t):
    return np.minimum(t / mu, 1.0)


def _G_raised_cosine(mu, t):
    inside = (t + (mu / np.pi) * np.sin(np.pi * np.minimum(t, mu) / mu)) / mu
    return np.where(t < mu, inside, 1.0)


_DENSITIES: Dict[KernelKind, Callable] = {
    KernelKind.EXPONENTIAL: _g_exponential,
    KernelKind.TIMES_T_EXPONENTIAL: _g_times_t_exponential,
    KernelKind.GAUSSIAN: _g_gaussian,
    KernelKind.RECTANGULAR: _g_rectangular,
    KernelKind.RAISED_COSINE: _g_raised_cosine,
}

# Closed-form antiderivatives G(t) = int_0^t g
_CDFS: Dict[KernelKind, Callable] = {
    KernelKind.EXPONENTIAL: _G_exponential,
    KernelKind.TIMES_T_EXPONENTIAL: _G_times_t_exponential,
    KernelKind.GAUSSIAN: _G_gaussian,
    KernelKind.RECTANGULAR: _G_rectangular,
    KernelKind.RAISED_COSINE: _G_raised_cosine,
}


def kernel_eval(kernel: KernelSpec, t):
    """
    Evaluate the damping kernel g(t).

    Args:
        kernel: Any kernel except Dirac
        t: Time(s) in seconds, t >= 0

    Returns:
        g(t), scalar or array like t
    """
    if kernel.is_dirac:
        raise DefinitionError("Dirac kernel is not pointwise-evaluable")
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr < 0):
        raise DefinitionError(f"kernel time must be >= 0, got {t}")
    value = _DENSITIES[kernel.kind](kernel.mu, t_arr)
    return float(value) if np.ndim(value) == 0 else value


def integrate_kernel(kernel: KernelSpec, a: float, b: float) -> float:
    """Adaptive quadrature of g over [a, b] (absolute tolerance 1e-10)."""
    breaks = [kernel.mu] if kernel.kind in (KernelKind.RECTANGULAR, KernelKind.RAISED_COSINE) and a < kernel.mu < b else None
    value, _ = quad(lambda s: _DENSITIES[kernel.kind](kernel.mu, s), a, b, epsabs=QUAD_TOL, epsrel=0.0,
                    limit=200, points=breaks)
    return float(value)


def kernel_cdf(kernel: KernelSpec, t):
    """Cumulative kernel G(t) = int_0^t g(s) ds, closed form where one exists."""
    if kernel.is_dirac:
        raise DefinitionError("Dirac kernel has no cumulative weights")
    t_arr = np.asarray(t, dtype=np.float64)
    cdf = _CDFS.get(kernel.kind)
    if cdf is None:
        value = np.vectorize(lambda s: integrate_kernel(kernel, 0.0, s))(t_arr)
    else:
        value = cdf(kernel.mu, t_arr)
    return float(value) if np.ndim(value) == 0 else value


def kernel_weight(kernel: KernelSpec, i: int, k: int, dt: float) -> float:
    """
    Quadrature weight W_i of the convolution at step k.

    W_i = int_{(i-1)dt}^{i dt} g(k dt - tau) dtau = G((k-i+1) dt) - G((k-i) dt)
    """
    if not 1 <= i <= k:
        raise DefinitionError(f"weight index must satisfy 1 <= i <= k, got i={i}, k={k}")
    lag = k - i
    return max(0.0, kernel_cdf(kernel, (lag + 1) * dt) - kernel_cdf(kernel, lag * dt))


def lag_weights(kernel: KernelSpec, n_lags: int, dt: float) -> np.ndarray:
    """Weights indexed by lag j = k - i, so W_i at step k is lag_weights[k - i]."""
    edges = kernel_cdf(kernel, dt * np.arange(n_lags + 1))
    return np.maximum(np.diff(edges), 0.0)


def white_noise_force(n: int, variance: float, dt: float, duration: float, seed: int) -> TimeSeries:
    """
    Zero-mean Gaussian white-noise force on every DOF.

    Returns:
        TimeSeries with channels force_1..force_n and round(duration/dt) + 1 samples
    """
    steps = step_count(dt, duration)
    if variance < 0:
        raise DefinitionError(f"force variance must be >= 0, got {variance}")
    rng = np.random.default_rng(seed)
    data = np.sqrt(variance) * rng.standard_normal((n, steps + 1))
    channels = tuple(Channel(f"force_{d + 1}", UNIT_FORCE) for d in range(n))
    return TimeSeries(dt=dt, channels=channels, data=data)


def step_count(dt: float, duration: float) -> int:
    if not (dt > 0 and duration > 0):
        raise DefinitionError(f"dt and duration must be positive, got dt={dt}, duration={duration}")
    ratio = duration / dt
    steps = int(round(ratio))
    if abs(ratio - steps) > 1e-9 * max(1.0, ratio) or steps < 1:
        raise DefinitionError(f"duration {duration} is not a whole number of steps of {dt}")
    return steps


def stack_matrices(M: np.ndarray, C: np.ndarray, K: np.ndarray, dt: float, W_k: float,
                   dirac: bool) -> Tuple[np.ndarray, np.ndarray]:
    """Left and right block matrices (L, R) of one step."""
    n = M.shape[0]
    I, Z = np.eye(n), np.zeros((n, n))
    if dirac:
        # w_k = v_k
        conv_lhs, conv_rhs = -I, Z
    else:
        conv_lhs, conv_rhs = -0.5 * W_k * I, 0.5 * W_k * I
    L = np.block([
        [M, Z, C, K],
        [0.25 * dt ** 2 * I, -dt * I, Z, I],
        [-0.5 * dt * I, I, Z, Z],
        [Z, conv_lhs, I, Z],
    ])
    R = np.block([
        [Z, Z, Z, Z],
        [-0.25 * dt ** 2 * I, Z, Z, I],
        [0.5 * dt * I, I, Z, Z],
        [Z, conv_rhs, Z, Z],
    ])
    return L, R


@dataclass
class IntegratorState:
    """Stepping state: index, stack z, lag weights, convolution history and step matrices."""
    k: int
    z: np.ndarray
    W: np.ndarray
    w_prev: np.ndarray
    f_w: np.ndarray
    F: np.ndarray
    B: np.ndarray


class ConvolutionIntegrator:
    """
    Step-by-step solver for M a + C w + K x = f with w = (g * v).

    trial() evaluates a step without committing it, which lets the
    contact solver iterate on the forcing; commit() accepts it.
    """

    def __init__(self, M, C, K, kernel: KernelSpec, dt: float, n_steps: int,
                 x0: Sequence[float], v0: Sequence[float], f0: Sequence[float]):
        self.M, self.C, self.K = (np.atleast_2d(np.asarray(a, dtype=np.float64)) for a in (M, C, K))
        self.n = self.M.shape[0]
        self.kernel = kernel
        self.dt = dt
        self.n_steps = n_steps
        self.dirac = kernel.is_dirac

        x0 = np.broadcast_to(np.asarray(x0, dtype=np.float64), (self.n,)).copy()
        v0 = np.broadcast_to(np.asarray(v0, dtype=np.float64), (self.n,)).copy()
        f0 = np.broadcast_to(np.asarray(f0, dtype=np.float64), (self.n,)).copy()

        W = np.zeros(0) if self.dirac else lag_weights(kernel, n_steps + 1, dt)
        W_k = 0.0 if self.dirac else float(W[0])
        L, R = stack_matrices(self.M, self.C, self.K, dt, W_k, self.dirac)
        cond = np.linalg.cond(L)
        if not np.isfinite(cond) or cond > COND_LIMIT:
            raise NumericalError("integration matrix singular", step=1)
        F = np.linalg.solve(L, R)
        B = np.linalg.solve(L, np.eye(4 * self.n))
        logger.debug(f"stepping matrices built: n={self.n}, dt={dt}, W_k={W_k:.6g}, cond={cond:.3g}")

        # No history before t = 0
        w0 = v0.copy() if self.dirac else np.zeros(self.n)
        a0 = np.linalg.solve(self.M, f0 - self.C @ w0 - self.K @ x0)
        z0 = np.concatenate([a0, v0, w0, x0])

        # Trapezoidal velocity means (v_i + v_{i-1}) / 2, row i for interval i
        self._v_mean = np.zeros((n_steps + 1, self.n))
        self.state = IntegratorState(k=0, z=z0, W=W, w_prev=w0, f_w=np.zeros(self.n), F=F, B=B)

    def blocks(self, z: Optional[np.ndarray] = None) -> Tuple[np.ndarray, ...]:
        """Split a stack into (a, v, w, x)."""
        z = self.state.z if z is None else z
        n = self.n
        return z[:n], z[n:2 * n], z[2 * n:3 * n], z[3 * n:]

    def history_term(self, k: int) -> np.ndarray:
        """f_w at step k: sum over i = 1..k-1 of W_i (v_i + v_{i-1}) / 2."""
        if self.dirac or k < 2:
            return np.zeros(self.n)
        weights = self.state.W[k - 1:0:-1]
        return weights @ self._v_mean[1:k]

    def trial(self, f_k: np.ndarray, f_w: Optional[np.ndarray] = None) -> np.ndarray:
        """Stack z_k for force f_k, without advancing."""
        k = self.state.k + 1
        if f_w is None:
            f_w = self.history_term(k)
        u = np.zeros(4 * self.n)
        u[:self.n] = f_k
        u[3 * self.n:] = f_w
        return self.state.F @ self.state.z + self.state.B @ u

    def commit(self, z_k: np.ndarray, f_w: np.ndarray) -> None:
        k = self.state.k + 1
        if not np.all(np.isfinite(z_k)):
            raise NumericalError("integration diverged", step=k)
        _, v_prev, _, _ = self.blocks()
        _, v_k, w_k, _ = self.blocks(z_k)
        self._v_mean[k] = 0.5 * (v_k + v_prev)
        self.state.k = k
        self.state.z = z_k
        self.state.w_prev = w_k
        self.state.f_w = f_w

    def step(self, f_k: np.ndarray) -> np.ndarray:
        k = self.state.k + 1
        f_w = self.history_term(k)
        z_k = self.trial(f_k, f_w)
        self.commit(z_k, f_w)
        return z_k


def simulate_gendamp(system: GenDampedSystem, force: Optional[TimeSeries], x0, v0, dt: float,
                     duration: float) -> TimeSeries:
    """
    Response of a convolution-damped linear system.

    Args:
        system: M, C, K and the damping kernel
        force: n-channel force sampled at dt (None for free vibration)
        x0, v0: Initial displacement and velocity (n-vectors)
        dt: Time step in seconds
        duration: Simulated time in seconds

    Returns:
        TimeSeries with disp_i, vel_i, accel_i for every DOF
    """
    steps = step_count(dt, duration)
    n = system.n
    if force is None:
        f = np.zeros((steps + 1, n))
    else:
        if force.n_channels != n:
            raise DefinitionError(f"force has {force.n_channels} channels for a {n}-DOF system")
        if not np.isclose(force.dt, dt, rtol=1e-12, atol=0):
            raise DefinitionError(f"force dt {force.dt} differs from integration dt {dt}")
        if force.n_samples < steps + 1:
            raise DefinitionError(f"force has {force.n_samples} samples, {steps + 1} needed")
        f = force.data[:, :steps + 1].T

    integrator = ConvolutionIntegrator(system.M, system.C, system.K, system.kernel, dt, steps, x0, v0, f[0])
    history = np.empty((steps + 1, 4 * n))
    history[0] = integrator.state.z
    for k in range(1, steps + 1):
        history[k] = integrator.step(f[k])

    logger.debug(f"gendamp '{system.name or system.kernel.label()}' integrated {steps} steps")
    a, v, _, x = (history[:, i * n:(i + 1) * n] for i in range(4))
    return response_series(dt, x, v, a)


EXPERIMENT_M = [[1.0, 0.0], [0.0, 1.0]]
EXPERIMENT_C = [[3.0, -2.0], [-2.0, 2.0]]
EXPERIMENT_K = [[20.0, -11.0], [-11.0, 11.0]]


def make_linear_experiment_models() -> Tuple[GenDampedSystem, GenDampedSystem, GenDampedSystem]:
    """The 2-DOF experiment system with the exponential, Gaussian and Dirac kernels (classes A, B, C)."""
    kernels = (
        ("A", KernelSpec.exponential(1.5)),
        ("B", KernelSpec.gaussian(1.5)),
        ("C", KernelSpec.dirac()),
    )
    return tuple(
        GenDampedSystem(M=EXPERIMENT_M, C=EXPERIMENT_C, K=EXPERIMENT_K, kernel=kernel, name=name)
        for name, kernel in kernels
    )
