"""
Kinematic Kalman filter: acceleration drives the prediction, displacement
corrects it. No structural model is involved.
"""
from typing import Optional, Tuple

import numpy as np
from loguru import logger

from src.models.kalman import KfConfig, KfState, KfStepTrace
from src.models.signal import UNIT_DISP, UNIT_VEL, TimeSeries
from src.utils.errors import NumericalError, SignalError


def kf_predict(state: KfState, a_k: float, cfg: KfConfig) -> KfState:
    """x <- A_d x + B_d a_k;  P <- A_d P A_d^T + Q_d."""
    if not np.isfinite(a_k):
        raise NumericalError("nonfinite acceleration input", step=state.k)
    A = cfg.A_d
    x = A @ state.x + cfg.B_d * a_k
    P = A @ state.P @ A.T + cfg.Q_d
    return KfState(x=x, P=0.5 * (P + P.T), k=state.k + 1)


def kf_update(state: KfState, d_k: float, cfg: KfConfig) -> Tuple[KfState, KfStepTrace]:
    """
    Displacement measurement update in Joseph form.

    J = P H^T / (R_d + H P H^T)
    x <- x + J (d_k - H x)
    P <- (I - J H) P (I - J H)^T + J R_d J^T, then symmetrized
    """
    if not np.isfinite(d_k):
        raise NumericalError("nonfinite displacement measurement", step=state.k)
    H = cfg.H
    s = cfg.R_d + H @ state.P @ H
    if not s > 0:
        raise NumericalError("non-positive innovation variance", step=state.k)

    J = state.P @ H / s
    innovation = float(d_k - H @ state.x)
    x = state.x + J * innovation
    I_JH = np.eye(2) - np.outer(J, H)
    P = I_JH @ state.P @ I_JH.T + cfg.R_d * np.outer(J, J)
    P = 0.5 * (P + P.T)

    posterior = KfState(x=x, P=P, k=state.k)
    trace = KfStepTrace(gain=J, innovation=innovation, x_prior=state.x, P_prior=state.P,
                        x_post=posterior.x, P_post=posterior.P)
    return posterior, trace


class KinematicKalmanFilter:
    """
    Sequential filter over one acceleration/displacement record.

    Not thread-safe: one instance per signal.
    """

    def __init__(self, cfg: KfConfig, init: KfState):
        self.cfg = cfg
        self.state = init
        self.updates = 0
        self.last_trace: Optional[KfStepTrace] = None

    def predict(self, a_k: float) -> KfState:
        self.state = kf_predict(self.state, a_k, self.cfg)
        return self.state

    def update(self, d_k: float) -> KfState:
        self.state, trace = kf_update(self.state, d_k, self.cfg)
        self.last_trace = trace
        self.updates += 1
        return self.state

    def run(self, accel: np.ndarray, disp: np.ndarray) -> np.ndarray:
        """
        Filter a record; predict every step with the previous acceleration,
        update on steps k with k % disp_decimation == 0.

        Returns:
            (samples, 2) estimates [displacement, velocity]
        """
        dec = self.cfg.disp_decimation
        n = accel.size
        estimates = np.empty((n, 2))
        self.update(disp[0])
        estimates[0] = self.state.x
        for k in range(1, n):
            self.predict(accel[k - 1])
            if k % dec == 0:
                self.update(disp[k // dec])
            estimates[k] = self.state.x
        return estimates


def _check_grids(accel: TimeSeries, disp: TimeSeries, cfg: KfConfig) -> None:
    if not np.isclose(accel.dt, cfg.dt, rtol=1e-9, atol=0):
        raise SignalError(f"acceleration dt {accel.dt} does not match filter dt {cfg.dt}")
    dec = cfg.disp_decimation
    if not np.isclose(disp.dt, cfg.dt * dec, rtol=1e-9, atol=0):
        raise SignalError(f"displacement dt {disp.dt} does not match {dec} x {cfg.dt}")
    if not np.isclose(disp.t0, accel.t0, rtol=0, atol=1e-12):
        raise SignalError(f"displacement starts at {disp.t0}, acceleration at {accel.t0}")
    expected = (accel.n_samples - 1) // dec + 1
    if disp.n_samples != expected:
        raise SignalError(f"displacement has {disp.n_samples} samples, {expected} expected on the acceleration grid")


def fuse_signals(accel: TimeSeries, disp: TimeSeries, cfg: KfConfig, init: Optional[KfState] = None) -> TimeSeries:
    """
    Fuse acceleration and displacement into filtered displacement and velocity.

    Args:
        accel: Single-channel acceleration at cfg.dt
        disp: Single-channel displacement at cfg.dt * disp_decimation, same start time
        cfg: Filter model and covariances
        init: Initial estimate (default: cfg.x0, else first displacement sample at rest; P0 = P0_scale I)

    Returns:
        TimeSeries with channels (disp, vel) on the acceleration grid
    """
    _check_grids(accel, disp, cfg)
    a, d = accel.values(), disp.values()
    if init is None:
        if cfg.x0 is not None:
            init = KfState(x=cfg.x0, P=cfg.P0_scale * np.eye(2))
        else:
            init = KfState.initial(displacement=float(d[0]), p0_scale=cfg.P0_scale)

    kf = KinematicKalmanFilter(cfg, init)
    estimates = kf.run(a, d)
    logger.debug(f"kalman fusion: {a.size} steps, {kf.updates} updates, final trace(P)={np.trace(kf.state.P):.3g}")
    return TimeSeries.from_channels(
        accel.dt,
        {"disp": (UNIT_DISP, estimates[:, 0]), "vel": (UNIT_VEL, estimates[:, 1])},
        t0=accel.t0,
    )
