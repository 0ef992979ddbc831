"""
Kinematic Kalman filter models: displacement/velocity state, covariances
and the discrete constant-acceleration process model.
"""
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional, Sequence

import numpy as np

from src.utils.errors import DefinitionError


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class KfState:
    """State estimate x = [displacement, velocity] with covariance P at step k."""
    x: np.ndarray
    P: np.ndarray
    k: int = 0

    def __post_init__(self):
        x, P = _frozen(self.x).reshape(2), _frozen(self.P).reshape(2, 2)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "P", P)

    @classmethod
    def initial(cls, displacement: float = 0.0, velocity: float = 0.0, p0_scale: float = 1e-2) -> "KfState":
        """Default initialization: first displacement sample, zero velocity, P0 = p0_scale * I."""
        return cls(x=[displacement, velocity], P=p0_scale * np.eye(2), k=0)


@dataclass(frozen=True, eq=False)
class KfConfig:
    """
    Discrete kinematic model:
    x(k+1) = A_d x(k) + B_d a(k), y = H x, with process covariance Q_d
    and scalar displacement measurement variance R_d.
    """
    dt: float
    Q_d: np.ndarray = field(default_factory=lambda: 1e-9 * np.eye(2))
    R_d: float = 1e-3
    disp_decimation: int = 1
    x0: Optional[Sequence[float]] = None
    P0_scale: float = 1e-2

    def __post_init__(self):
        if not self.dt > 0:
            raise DefinitionError(f"Kalman dt must be positive, got {self.dt}")
        Q = _frozen(self.Q_d).reshape(2, 2)
        if not np.allclose(Q, Q.T) or np.linalg.eigvalsh(Q).min() < -1e-15:
            raise DefinitionError("Q_d must be symmetric positive semi-definite")
        if not self.R_d > 0:
            raise DefinitionError(f"R_d must be positive, got {self.R_d}")
        if int(self.disp_decimation) < 1:
            raise DefinitionError(f"disp_decimation must be >= 1, got {self.disp_decimation}")
        object.__setattr__(self, "Q_d", Q)
        object.__setattr__(self, "R_d", float(self.R_d))
        object.__setattr__(self, "disp_decimation", int(self.disp_decimation))

    @property
    def A_d(self) -> np.ndarray:
        return np.array([[1.0, self.dt], [0.0, 1.0]])

    @property
    def B_d(self) -> np.ndarray:
        return np.array([0.5 * self.dt ** 2, self.dt])

    @property
    def H(self) -> np.ndarray:
        return np.array([1.0, 0.0])

    def with_dt(self, dt: float) -> "KfConfig":
        return KfConfig(dt=dt, Q_d=self.Q_d, R_d=self.R_d, disp_decimation=self.disp_decimation,
                        x0=self.x0, P0_scale=self.P0_scale)

    def to_dict(self) -> dict:
        return {
            "dt": self.dt,
            "Qd_scale": float(self.Q_d[0, 0]),
            "Rd": self.R_d,
            "disp_decimation": self.disp_decimation,
            "x0": list(self.x0) if self.x0 is not None else None,
            "P0_scale": self.P0_scale,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], dt: Optional[float] = None) -> "KfConfig":
        """Parse {dt, Qd_scale, Rd, disp_decimation, x0, P0_scale}; an explicit dt wins."""
        return cls(
            dt=float(dt if dt is not None else data["dt"]),
            Q_d=float(data.get("Qd_scale", 1e-9)) * np.eye(2),
            R_d=float(data.get("Rd", 1e-3)),
            disp_decimation=int(data.get("disp_decimation", 1)),
            x0=data.get("x0"),
            P0_scale=float(data.get("P0_scale", 1e-2)),
        )


@dataclass(frozen=True, eq=False)
class KfStepTrace:
    """Diagnostics of one measurement update."""
    gain: np.ndarray
    innovation: float
    x_prior: np.ndarray
    P_prior: np.ndarray
    x_post: np.ndarray
    P_post: np.ndarray
