"""
Signal-level numerics: RMS, measurement noise and double integration.
"""
from typing import Optional, Sequence, Union

import numpy as np
from scipy.integrate import cumulative_trapezoid

from src.models.signal import UNIT_ACCEL, UNIT_DISP, UNIT_VEL, Channel, NoiseModel, TimeSeries
from src.utils.errors import SignalError

SeriesLike = Union[TimeSeries, np.ndarray]


def _samples(series: SeriesLike) -> np.ndarray:
    if isinstance(series, TimeSeries):
        return series.values()
    x = np.asarray(series, dtype=np.float64).ravel()
    if x.size == 0:
        raise SignalError("empty signal")
    return x


def rms(series: SeriesLike) -> float:
    """Root mean square of a single-channel signal."""
    x = _samples(series)
    return float(np.sqrt(np.mean(x * x)))


def noise_std(series: SeriesLike, ratio: float) -> float:
    """Standard deviation of the measurement noise for an RMS noise-to-signal ratio."""
    return ratio * rms(series)


def add_measurement_noise(series: TimeSeries, noise: NoiseModel) -> TimeSeries:
    """
    Add zero-mean Gaussian white noise to every channel.

    Each channel's noise standard deviation is noise.ratio times that
    channel's own RMS. Channels draw from one generator in channel order,
    so the result is a pure function of (series, noise).

    Args:
        series: Clean signal
        noise: Ratio and seed

    Returns:
        Noisy signal on the same grid
    """
    if not np.all(np.isfinite(series.data)):
        raise SignalError("cannot add noise to a nonfinite signal")
    if noise.ratio == 0:
        return series

    rng = np.random.default_rng(noise.seed)
    noisy = np.empty_like(series.data)
    for c, row in enumerate(series.data):
        std = noise_std(row, noise.ratio)
        noisy[c] = row + std * rng.standard_normal(row.size)
    return series.with_data(noisy)


def double_integrate(accel: SeriesLike, x0: float = 0.0, v0: float = 0.0, dt: Optional[float] = None) -> TimeSeries:
    """
    Trapezoidal double integration of an acceleration record.

    v[k+1] = v[k] + dt (a[k] + a[k+1]) / 2
    x[k+1] = x[k] + dt (v[k] + v[k+1]) / 2

    Returns:
        TimeSeries with channels (disp, vel)
    """
    if isinstance(accel, TimeSeries):
        dt, t0 = accel.dt, accel.t0
    else:
        if dt is None:
            raise SignalError("dt is required when integrating a bare array")
        t0 = 0.0
    a = _samples(accel)
    if a.size < 2:
        raise SignalError(f"double integration needs at least 2 samples, got {a.size}")

    v = v0 + cumulative_trapezoid(a, dx=dt, initial=0.0)
    x = x0 + cumulative_trapezoid(v, dx=dt, initial=0.0)
    return TimeSeries.from_channels(dt, {"disp": (UNIT_DISP, x), "vel": (UNIT_VEL, v)}, t0=t0)


def zscore(x: np.ndarray, eps: float = 1e-12) -> np.ndarray:
    """Per-channel standardization over time; constant channels map to zero."""
    x = np.asarray(x, dtype=np.float64)
    mean = x.mean(axis=-1, keepdims=True)
    std = x.std(axis=-1, keepdims=True)
    return (x - mean) / np.maximum(std, eps)


def response_series(dt: float, disp: np.ndarray, vel: np.ndarray, accel: np.ndarray,
                    extra: Sequence[tuple] = ()) -> TimeSeries:
    """
    Pack (samples, dof) response arrays as channels disp_i, vel_i, accel_i grouped by DOF (1-based).

    Args:
        extra: Additional (name, unit, values) channels appended at the end
    """
    disp, vel, accel = (np.atleast_2d(np.asarray(a, dtype=np.float64).T).T for a in (disp, vel, accel))
    channels, rows = [], []
    for d in range(disp.shape[1]):
        for name, unit, values in (("disp", UNIT_DISP, disp), ("vel", UNIT_VEL, vel), ("accel", UNIT_ACCEL, accel)):
            channels.append(Channel(f"{name}_{d + 1}", unit))
            rows.append(values[:, d])
    for name, unit, values in extra:
        channels.append(Channel(name, unit))
        rows.append(np.asarray(values, dtype=np.float64))
    return TimeSeries(dt=dt, channels=tuple(channels), data=np.vstack(rows))
