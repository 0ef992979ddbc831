"""
Damping kernel models for the generalized (convolution) damping classes.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Any, Mapping, Optional

from src.utils.errors import DefinitionError


class KernelKind(Enum):
    """Kernel families g(t), each normalized so that its integral over t >= 0 is 1."""
    EXPONENTIAL = "exponential"              # mu * exp(-mu t)
    TIMES_T_EXPONENTIAL = "times_t_exponential"  # mu^2 t exp(-mu t)
    GAUSSIAN = "gaussian"                    # 2 sqrt(mu/pi) exp(-mu t^2)
    RECTANGULAR = "rectangular"              # 1/mu on (0, mu)
    RAISED_COSINE = "raised_cosine"          # (1 + cos(pi t/mu))/mu on (0, mu)
    DIRAC = "dirac"                          # delta(t): viscous damping


@dataclass(frozen=True)
class KernelSpec:
    """One damping kernel and its parameter mu (absent for Dirac)."""
    kind: KernelKind
    mu: Optional[float] = None

    def __post_init__(self):
        kind = KernelKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is KernelKind.DIRAC:
            if self.mu is not None:
                raise DefinitionError("Dirac kernel takes no parameter")
            return
        if self.mu is None or not float(self.mu) > 0:
            raise DefinitionError(f"{kind.value} kernel needs mu > 0, got {self.mu}")
        object.__setattr__(self, "mu", float(self.mu))

    @property
    def is_dirac(self) -> bool:
        return self.kind is KernelKind.DIRAC

    @classmethod
    def exponential(cls, mu: float) -> "KernelSpec":
        return cls(KernelKind.EXPONENTIAL, mu)

    @classmethod
    def gaussian(cls, mu: float) -> "KernelSpec":
        return cls(KernelKind.GAUSSIAN, mu)

    @classmethod
    def dirac(cls) -> "KernelSpec":
        return cls(KernelKind.DIRAC)

    def label(self) -> str:
        return self.kind.value if self.is_dirac else f"{self.kind.value}({self.mu:g})"

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "mu": self.mu}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "KernelSpec":
        try:
            return cls(KernelKind(data["kind"]), data.get("mu"))
        except (KeyError, ValueError) as e:
            raise DefinitionError(f"malformed kernel definition {dict(data)!r}: {e}") from e
