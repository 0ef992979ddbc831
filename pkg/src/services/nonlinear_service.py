"""
Nonlinear simulators: free fall onto a convolution-damped base, the Bouc-Wen
shear building, and the synthetic ground motions that drive it.
"""
from typing import Optional, Tuple

import numpy as np
from loguru import logger
from scipy import signal as sps

from src.models.signal import UNIT_ACCEL, Channel, TimeSeries
from src.models.system import BoucWenKind, BoucWenVariant, ContactMode, FreeFallSystem, ShearBuilding
from src.services.gendamp_service import ConvolutionIntegrator, step_count
from src.services.signal_service import response_series
from src.utils.errors import DefinitionError, NumericalError

FIXED_POINT_TOL = 1e-10
FIXED_POINT_MAX_ITER = 50
MAX_CONTACT_FLIPS = 4


def _contact(system: FreeFallSystem, x: float, mode: ContactMode) -> float:
    if mode is ContactMode.NEVER:
        return 0.0
    if mode is ContactMode.ALWAYS:
        return 1.0
    return 1.0 if x <= system.contact_level else 0.0


def _base_force(system: FreeFallSystem, h: float, v: float, w: float, x: float) -> float:
    """G(z) = H(x) (c v + c w + k x), measured from the contact level."""
    return h * (system.c * v + system.c * w + system.k * (x - system.contact_level))


def simulate_freefall(
    system: FreeFallSystem,
    dt: float,
    duration: float,
    seed: int,
    x0: float = 0.1,
    v0: float = 0.0,
    contact: ContactMode = ContactMode.AUTO,
    force_noise: bool = True,
) -> TimeSeries:
    """
    Mass falling onto a base that pushes back only while in contact.

    The convolution integrator runs with zero C and K blocks; the base force
    enters the forcing as -f_n and is solved per step by fixed-point
    iteration (initial guess: previous step's value).

    Args:
        system: Mass, base damper/spring and kernel
        dt: Time step in seconds
        duration: Simulated time in seconds
        seed: Seed of the white-noise force
        x0, v0: Initial height and velocity
        contact: AUTO (x <= contact level), NEVER or ALWAYS
        force_noise: Add zero-mean white noise of system.force_variance to -m g

    Returns:
        TimeSeries with disp_1, vel_1, accel_1 and the contact indicator
    """
    contact = ContactMode(contact)
    steps = step_count(dt, duration)

    f = np.full(steps + 1, -system.m * system.gravity)
    if force_noise and system.force_variance > 0:
        rng = np.random.default_rng(seed)
        f = f + np.sqrt(system.force_variance) * rng.standard_normal(steps + 1)

    zero = np.zeros((1, 1))
    h0 = _contact(system, x0, contact)
    w0 = v0 if system.kernel.is_dirac else 0.0
    f_n = _base_force(system, h0, v0, w0, x0)
    integrator = ConvolutionIntegrator([[system.m]], zero, zero, system.kernel, dt, steps, [x0], [v0], [f[0] - f_n])

    history = np.empty((steps + 1, 4))
    indicator = np.empty(steps + 1)
    history[0], indicator[0] = integrator.state.z, h0
    total_iterations = 0
    for k in range(1, steps + 1):
        f_w = integrator.history_term(k)
        h_first = None
        h_prev = None
        flips = 0
        frozen = False
        for it in range(1, FIXED_POINT_MAX_ITER + 1):
            z_k = integrator.trial(np.array([f[k] - f_n]), f_w)
            a, v, w, x = (float(b[0]) for b in integrator.blocks(z_k))
            h = h_first if frozen else _contact(system, x, contact)
            if h_first is None:
                h_first = h
            if h_prev is not None and h != h_prev:
                flips += 1
                if flips > MAX_CONTACT_FLIPS:
                    # Chatter across the contact level: freeze H at the first iterate
                    frozen = True
                    h = h_first
            h_prev = h
            f_new = _base_force(system, h, v, w, x)
            converged = abs(f_new - f_n) <= FIXED_POINT_TOL * max(1.0, abs(f_new))
            f_n = f_new
            if converged:
                break
        else:
            raise NumericalError(f"contact force did not converge in {FIXED_POINT_MAX_ITER} iterations", step=k)

        z_k = integrator.trial(np.array([f[k] - f_n]), f_w)
        integrator.commit(z_k, f_w)
        history[k] = z_k
        indicator[k] = h
        total_iterations += it

    logger.debug(f"free fall: {steps} steps, {total_iterations / steps:.2f} fixed-point iterations per step")
    a, v, _, x = history[:, 0], history[:, 1], history[:, 2], history[:, 3]
    return response_series(dt, x, v, a, extra=(("contact", "", indicator),))


def boucwen_rdot(variant: BoucWenVariant, xdot, r, eps=0.0) -> Tuple[np.ndarray, np.ndarray]:
    """
    Hysteretic rate r' and dissipated-energy rate eps' = r x'.

    standard:  r' = A x' - beta |x'| |r|^(n-1) r - gamma x' |r|^n
    degrading: standard / eta,  eta = 1 + delta_eta eps
    pinching:  r' = x' phi / (1 + a(r) phi),
               phi = A - |r|^n (beta sgn(x' r) + gamma),
               a(r) = sqrt(2/pi) (s/sigma) exp(-r^2 / (2 sigma^2)),  s = delta_sigma eps

    Accepts scalars or equally shaped arrays.
    """
    xdot = np.asarray(xdot, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    p = variant
    abs_r_n = np.abs(r) ** p.n
    eps_dot = r * xdot

    if p.kind is BoucWenKind.PINCHING:
        phi = p.A - abs_r_n * (p.beta * np.sign(xdot * r) + p.gamma)
        s = p.delta_sigma * eps
        slip = np.sqrt(2.0 / np.pi) * (s / p.sigma) * np.exp(-r ** 2 / (2.0 * p.sigma ** 2))
        return xdot * phi / (1.0 + slip * phi), eps_dot

    rdot = p.A * xdot - p.beta * np.abs(xdot) * np.abs(r) ** (p.n - 1) * r - p.gamma * xdot * abs_r_n
    if p.kind is BoucWenKind.DEGRADING:
        eta = 1.0 + p.delta_eta * eps
        if np.any(eta <= 0):
            raise NumericalError("degradation function non-positive")
        rdot = rdot / eta
    return rdot, eps_dot


def _shear_rhs(building: ShearBuilding, y: np.ndarray, ag: float) -> np.ndarray:
    """d/dt of [x (N), v (N), r1, eps1] for relative story displacements."""
    N = building.stories
    x, v = y[:N], y[N:2 * N]
    r1, eps1 = y[2 * N], y[2 * N + 1]

    drift = np.diff(x, prepend=0.0)
    drift_rate = np.diff(v, prepend=0.0)
    restoring = building.k * drift
    restoring[0] = building.k[0] * r1
    shear = restoring + building.c * drift_rate
    floor_force = shear - np.append(shear[1:], 0.0)

    acc = -ag - floor_force / building.m
    rdot, eps_dot = boucwen_rdot(building.variant, drift_rate[0], r1, eps1)
    return np.concatenate([v, acc, [float(rdot), float(eps_dot)]])


def simulate_shear_boucwen(
    building: ShearBuilding,
    ground_accel: TimeSeries,
    dt: Optional[float] = None,
    total_accel: bool = False,
) -> TimeSeries:
    """
    RK4 response of the shear building to a ground acceleration record.

    The ground acceleration is linear between samples, so midpoint stages use
    the average of the bracketing samples. Initial state is at rest.

    Args:
        building: Stories, masses, stiffnesses, dampers and the story-1 Bouc-Wen law
        ground_accel: Single-channel record; its dt is the integration step
        dt: Optional check value for the record's time step
        total_accel: Report absolute accelerations (relative + ground)

    Returns:
        TimeSeries with disp_i, vel_i, accel_i per story, then r_1 and eps_1
    """
    ag = ground_accel.values()
    if dt is not None and not np.isclose(dt, ground_accel.dt, rtol=1e-12, atol=0):
        raise DefinitionError(f"ground motion dt {ground_accel.dt} differs from requested dt {dt}; resampling is not supported")
    h = ground_accel.dt
    N = building.stories
    steps = ag.size - 1

    y = np.zeros(2 * N + 2)
    states = np.empty((steps + 1, y.size))
    accel = np.empty((steps + 1, N))
    states[0] = y
    accel[0] = _shear_rhs(building, y, ag[0])[N:2 * N]
    for k in range(steps):
        a0, a1 = ag[k], ag[k + 1]
        am = 0.5 * (a0 + a1)
        k1 = _shear_rhs(building, y, a0)
        k2 = _shear_rhs(building, y + 0.5 * h * k1, am)
        k3 = _shear_rhs(building, y + 0.5 * h * k2, am)
        k4 = _shear_rhs(building, y + h * k3, a1)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise NumericalError("integration diverged", step=k + 1)
        states[k + 1] = y
        accel[k + 1] = _shear_rhs(building, y, a1)[N:2 * N]

    if total_accel:
        accel = accel + ag[:, np.newaxis]
    logger.debug(f"shear building '{building.name or building.variant.kind.value}': {steps} RK4 steps")
    return response_series(
        h, states[:, :N], states[:, N:2 * N], accel,
        extra=(("r_1", "m", states[:, 2 * N]), ("eps_1", "m^2", states[:, 2 * N + 1])),
    )


def trapezoid_envelope(n: int, rise: float = 0.1, plateau: float = 0.5) -> np.ndarray:
    """Amplitude envelope rising over `rise`, flat over `plateau`, decaying over the rest."""
    u = np.linspace(0.0, 1.0, n)
    decay = 1.0 - rise - plateau
    return np.clip(np.minimum(u / rise, (1.0 - u) / decay), 0.0, 1.0)


def synth_ground_motion(
    seed: int,
    duration: float,
    dt: float,
    peak_accel: float,
    band: Tuple[float, float] = (0.5, 10.0),
    order: int = 4,
) -> TimeSeries:
    """
    Band-limited synthetic earthquake record.

    Gaussian noise under a trapezoidal envelope, zero-phase Butterworth
    band-pass, then rescaled so that max |a| equals peak_accel.

    Returns:
        Single-channel TimeSeries "ground_accel" in m/s^2
    """
    if not peak_accel > 0:
        raise DefinitionError(f"peak acceleration must be > 0, got {peak_accel}")
    steps = step_count(dt, duration)
    fs = 1.0 / dt
    low, high = band
    if not 0 < low < high < 0.5 * fs:
        raise DefinitionError(f"band {band} Hz must lie inside (0, {0.5 * fs}) Hz at dt={dt}")

    sos = sps.butter(order, [low, high], btype="bandpass", fs=fs, output="sos")
    # sosfiltfilt's default edge padding
    padlen = 3 * (2 * len(sos) + 1 - min((sos[:, 2] == 0).sum(), (sos[:, 5] == 0).sum()))
    if steps + 1 <= padlen:
        raise DefinitionError(f"record of {steps + 1} samples is too short for the order-{order} band-pass "
                              f"(needs more than {padlen}); lengthen duration {duration} s")

    rng = np.random.default_rng(seed)
    raw = rng.standard_normal(steps + 1) * trapezoid_envelope(steps + 1)
    filtered = sps.sosfiltfilt(sos, raw)
    scaled = filtered * (peak_accel / np.max(np.abs(filtered)))
    return TimeSeries(dt=dt, channels=(Channel("ground_accel", UNIT_ACCEL),), data=scaled)
