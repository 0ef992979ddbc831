"""
Newmark average-acceleration integration of linear shear buildings under ground motion.
"""
import numpy as np
from loguru import logger
from scipy.linalg import lu_factor, lu_solve

from src.models.signal import TimeSeries
from src.models.system import RayleighBuilding
from src.services.signal_service import response_series
from src.utils.errors import NumericalError


def newmark_linear(M: np.ndarray, C: np.ndarray, K: np.ndarray, forces: np.ndarray, dt: float,
                   beta: float = 0.25, gamma: float = 0.5):
    """
    Integrate M a + C v + K x = p(t) from rest.

    Args:
        forces: (samples, n) load history
        dt: Time step

    Returns:
        (x, v, a), each (samples, n)
    """
    steps, n = forces.shape[0] - 1, M.shape[0]

    # Newmark parameters
    a0 = 1.0 / (beta * dt ** 2)
    a1 = gamma / (beta * dt)
    a2 = 1.0 / (beta * dt)
    a3 = 1.0 / (2.0 * beta) - 1.0
    a4 = gamma / beta - 1.0
    a5 = 0.5 * dt * (gamma / beta - 2.0)
    a6 = dt * (1.0 - gamma)
    a7 = gamma * dt

    KE = K + a0 * M + a1 * C  # Effective stiffness
    lu = lu_factor(KE)

    x = np.zeros((steps + 1, n))
    v = np.zeros((steps + 1, n))
    a = np.zeros((steps + 1, n))
    a[0] = np.linalg.solve(M, forces[0])
    for k in range(steps):
        Rm = M @ (a0 * x[k] + a2 * v[k] + a3 * a[k])
        Rc = C @ (a1 * x[k] + a4 * v[k] + a5 * a[k])
        x[k + 1] = lu_solve(lu, forces[k + 1] + Rm + Rc)
        a[k + 1] = a0 * (x[k + 1] - x[k]) - a2 * v[k] - a3 * a[k]
        v[k + 1] = v[k] + a6 * a[k] + a7 * a[k + 1]
        if not np.all(np.isfinite(x[k + 1])):
            raise NumericalError("integration diverged", step=k + 1)
    return x, v, a


def simulate_rayleigh_building(building: RayleighBuilding, ground_accel: TimeSeries,
                               total_accel: bool = False) -> TimeSeries:
    """
    Relative response of a Rayleigh-damped shear building to ground acceleration.

    Returns:
        TimeSeries with disp_i, vel_i, accel_i per story
    """
    ag = ground_accel.values()
    M, C, K = building.matrices()
    forces = -np.outer(ag, np.diag(M))
    x, v, a = newmark_linear(M, C, K, forces, ground_accel.dt)
    if total_accel:
        a = a + ag[:, np.newaxis]
    logger.debug(f"rayleigh building '{building.name}': {ag.size - 1} Newmark steps")
    return response_series(ground_accel.dt, x, v, a)
