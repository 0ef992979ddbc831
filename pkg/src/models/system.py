"""
Structural system models used to generate labeled responses.
"""
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Mapping

import numpy as np

from src.models.kernel import KernelSpec
from src.utils.errors import DefinitionError, ShapeError


def _matrix(value, name: str) -> np.ndarray:
    m = np.array(value, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"{name} must be square, got shape {m.shape}")
    m.setflags(write=False)
    return m


@dataclass(frozen=True, eq=False)
class GenDampedSystem:
    """
    n-DOF linear system with convolution damping:
    M x'' + C (g * x')(t) + K x = f(t).
    """
    M: np.ndarray
    C: np.ndarray
    K: np.ndarray
    kernel: KernelSpec
    name: str = ""

    def __post_init__(self):
        M, C, K = _matrix(self.M, "M"), _matrix(self.C, "C"), _matrix(self.K, "K")
        if not (M.shape == C.shape == K.shape):
            raise ShapeError(f"M, C, K shapes differ: {M.shape}, {C.shape}, {K.shape}")
        if not np.allclose(M, M.T) or np.linalg.eigvalsh(M).min() <= 0:
            raise DefinitionError("M must be symmetric positive definite")
        if not np.allclose(K, K.T) or np.linalg.eigvalsh(K).min() < -1e-12 * max(1.0, np.abs(K).max()):
            raise DefinitionError("K must be symmetric positive semi-definite")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "K", K)

    @property
    def n(self) -> int:
        return self.M.shape[0]

    def with_kernel(self, kernel: KernelSpec, name: str = "") -> "GenDampedSystem":
        return replace(self, kernel=kernel, name=name or self.name)

    def to_dict(self) -> dict:
        return {
            "type": "gendamp",
            "name": self.name,
            "M": self.M.tolist(),
            "C": self.C.tolist(),
            "K": self.K.tolist(),
            "kernel": self.kernel.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "GenDampedSystem":
        return cls(
            M=data["M"],
            C=data["C"],
            K=data["K"],
            kernel=KernelSpec.from_dict(data["kernel"]),
            name=data.get("name", ""),
        )


class ContactMode(Enum):
    """How the base contact indicator H(x) is evaluated."""
    AUTO = "auto"      # H = 1 when x <= contact level
    NEVER = "never"    # ballistic flight only
    ALWAYS = "always"  # permanently in contact


@dataclass(frozen=True)
class FreeFallSystem:
    """Mass falling onto a base with spring, viscous and convolution damping."""
    kernel: KernelSpec
    m: float = 1.0
    c: float = 3.0
    k: float = 1000.0
    gravity: float = 9.81
    force_variance: float = 9.0
    contact_level: float = 0.0
    name: str = ""

    def __post_init__(self):
        if not (self.m > 0 and self.k > 0):
            raise DefinitionError(f"free-fall system needs m > 0 and k > 0, got m={self.m}, k={self.k}")
        if self.c < 0:
            raise DefinitionError(f"damper coefficient must be >= 0, got {self.c}")
        if self.force_variance < 0:
            raise DefinitionError(f"force variance must be >= 0, got {self.force_variance}")

    def to_dict(self) -> dict:
        return {
            "type": "freefall",
            "name": self.name,
            "m": self.m,
            "c": self.c,
            "k": self.k,
            "gravity": self.gravity,
            "force_variance": self.force_variance,
            "contact_level": self.contact_level,
            "kernel": self.kernel.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "FreeFallSystem":
        kwargs = {k: float(data[k]) for k in ("m", "c", "k", "gravity", "force_variance", "contact_level") if k in data}
        return cls(kernel=KernelSpec.from_dict(data["kernel"]), name=data.get("name", ""), **kwargs)


class BoucWenKind(Enum):
    """Hysteresis law governing the first story."""
    STANDARD = "standard"    # Model A: no degradation
    DEGRADING = "degrading"  # Model B: eta(t) = 1 + delta_eta * eps
    PINCHING = "pinching"    # Model C: series slip, s(t) = delta_sigma * eps


@dataclass(frozen=True)
class BoucWenVariant:
    """Bouc-Wen shape, degradation and pinching parameters."""
    kind: BoucWenKind = BoucWenKind.STANDARD
    A: float = 1.0
    beta: float = 2.0
    gamma: float = 1.0
    n: float = 2.0
    delta_eta: float = 0.4
    sigma: float = 0.1
    delta_sigma: float = 0.4

    def __post_init__(self):
        object.__setattr__(self, "kind", BoucWenKind(self.kind))
        if self.n < 1:
            raise DefinitionError(f"Bouc-Wen exponent n must be >= 1, got {self.n}")
        if self.kind is BoucWenKind.PINCHING and not self.sigma > 0:
            raise DefinitionError(f"pinching variant needs sigma > 0, got {self.sigma}")

    @property
    def r_max(self) -> float:
        """Ultimate hysteretic displacement (A / (beta + gamma))^(1/n)."""
        return (self.A / (self.beta + self.gamma)) ** (1.0 / self.n)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "A": self.A,
            "beta": self.beta,
            "gamma": self.gamma,
            "n": self.n,
            "delta_eta": self.delta_eta,
            "sigma": self.sigma,
            "delta_sigma": self.delta_sigma,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "BoucWenVariant":
        values = {k: float(v) for k, v in data.items() if k != "kind"}
        return cls(kind=BoucWenKind(data.get("kind", "standard")), **values)


def _story_array(value, stories: int, name: str) -> np.ndarray:
    arr = np.broadcast_to(np.asarray(value, dtype=np.float64), (stories,)).copy()
    if np.any(arr <= 0) and name != "c":
        raise DefinitionError(f"story {name} values must be > 0, got {arr}")
    if np.any(arr < 0):
        raise DefinitionError(f"story {name} values must be >= 0, got {arr}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ShearBuilding:
    """Lumped-mass shear building whose first story follows a Bouc-Wen law."""
    variant: BoucWenVariant = field(default_factory=BoucWenVariant)
    stories: int = 6
    m: Any = 1.0
    k: Any = 9.0
    c: Any = 0.25
    name: str = ""

    def __post_init__(self):
        if self.stories < 1:
            raise DefinitionError(f"stories must be >= 1, got {self.stories}")
        object.__setattr__(self, "m", _story_array(self.m, self.stories, "m"))
        object.__setattr__(self, "k", _story_array(self.k, self.stories, "k"))
        object.__setattr__(self, "c", _story_array(self.c, self.stories, "c"))

    def to_dict(self) -> dict:
        return {
            "type": "boucwen",
            "name": self.name,
            "stories": self.stories,
            "m": self.m.tolist(),
            "k": self.k.tolist(),
            "c": self.c.tolist(),
            "variant": self.variant.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ShearBuilding":
        return cls(
            variant=BoucWenVariant.from_dict(data.get("variant", {})),
            stories=int(data.get("stories", 6)),
            m=data.get("m", 1.0),
            k=data.get("k", 9.0),
            c=data.get("c", 0.25),
            name=data.get("name", ""),
        )


def shear_matrices(m: np.ndarray, k: np.ndarray) -> tuple:
    """Mass and stiffness matrices of a linear shear building (ground below story 1)."""
    n = len(m)
    M = np.diag(m)
    K = np.zeros((n, n))
    for i in range(n):
        K[i, i] += k[i]
        if i > 0:
            K[i, i - 1] -= k[i]
            K[i - 1, i] -= k[i]
            K[i - 1, i - 1] += k[i]
    return M, K


@dataclass(frozen=True, eq=False)
class RayleighBuilding:
    """Linear shear building with Rayleigh damping C = alpha_m M + alpha_k K."""
    alpha_m: float
    alpha_k: float = 0.0
    stories: int = 2
    m: Any = 1.0
    k: Any = 900.0
    name: str = ""

    def __post_init__(self):
        if self.stories < 1:
            raise DefinitionError(f"stories must be >= 1, got {self.stories}")
        if self.alpha_m < 0 or self.alpha_k < 0:
            raise DefinitionError("Rayleigh coefficients must be >= 0")
        object.__setattr__(self, "m", _story_array(self.m, self.stories, "m"))
        object.__setattr__(self, "k", _story_array(self.k, self.stories, "k"))

    def matrices(self) -> tuple:
        M, K = shear_matrices(self.m, self.k)
        return M, self.alpha_m * M + self.alpha_k * K, K

    def to_dict(self) -> dict:
        return {
            "type": "rayleigh",
            "name": self.name,
            "alpha_m": self.alpha_m,
            "alpha_k": self.alpha_k,
            "stories": self.stories,
            "m": self.m.tolist(),
            "k": self.k.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RayleighBuilding":
        return cls(
            alpha_m=float(data["alpha_m"]),
            alpha_k=float(data.get("alpha_k", 0.0)),
            stories=int(data.get("stories", 2)),
            m=data.get("m", 1.0),
            k=data.get("k", 900.0),
            name=data.get("name", ""),
        )
