"""
Run configuration and evaluation report models for the pipeline commands.
"""
import copy
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional

import numpy as np

from src.models.network import TrainConfig
from src.utils.errors import DefinitionError

SYSTEMS = ("gendamp", "freefall", "boucwen", "rayleigh")
CHANNELS = ("disp", "vel", "accel")
DISP_SOURCES = ("measured", "integrated")


def deep_merge(base: Mapping[str, Any], override: Mapping[str, Any]) -> Dict[str, Any]:
    """Recursively merge `override` into a copy of `base`; None values in override are skipped."""
    merged = copy.deepcopy(dict(base))
    for key, value in override.items():
        if value is None:
            continue
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


@dataclass(frozen=True)
class ClassDef:
    """One model class: its label and the system parameters that distinguish it."""
    label: str
    params: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ClassDef":
        params = {k: v for k, v in data.items() if k != "label"}
        return cls(label=str(data["label"]), params=params)

    def to_dict(self) -> dict:
        return {"label": self.label, **self.params}


@dataclass(frozen=True)
class Counts:
    """Signals generated per class and split."""
    train: int = 3
    validate: int = 1
    test: int = 3

    def __post_init__(self):
        if self.train < 1 or self.test < 1 or self.validate < 0:
            raise DefinitionError(f"counts must be train >= 1, validate >= 0, test >= 1, got {self}")

    def to_dict(self) -> dict:
        return {"train": self.train, "validate": self.validate, "test": self.test}


@dataclass
class RunConfig:
    """
    Everything needed to regenerate, train and evaluate one experiment.

    Built from a named preset in presets.json, then overridden by a JSON
    config file and finally by CLI flags.
    """
    name: str
    system: str
    classes: List[ClassDef]
    dt: float
    duration: float
    dof: int = 1
    channel: str = "disp"
    fuse: bool = False
    noise_ratio: float = 0.1
    counts: Counts = field(default_factory=Counts)
    network: str = "desk-scale"
    train: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 0
    total_accel: bool = False
    disp_source: str = "measured"
    normalize_input: bool = False
    excitation: Dict[str, Any] = field(default_factory=dict)
    system_params: Dict[str, Any] = field(default_factory=dict)
    kalman: Dict[str, Any] = field(default_factory=dict)
    description: str = ""

    def __post_init__(self):
        if self.system not in SYSTEMS:
            raise DefinitionError(f"unknown system '{self.system}', expected one of {SYSTEMS}")
        if len(self.classes) < 2:
            raise DefinitionError("an experiment needs at least two model classes")
        labels = [c.label for c in self.classes]
        if len(set(labels)) != len(labels):
            raise DefinitionError(f"duplicate class labels {labels}")
        if self.channel not in CHANNELS:
            raise DefinitionError(f"channel must be one of {CHANNELS}, got '{self.channel}'")
        if self.fuse and self.channel == "accel":
            raise DefinitionError("the kinematic filter produces no filtered acceleration; use disp or vel with fuse")
        if self.disp_source not in DISP_SOURCES:
            raise DefinitionError(f"disp_source must be one of {DISP_SOURCES}, got '{self.disp_source}'")
        if not (self.dt > 0 and self.duration > 0):
            raise DefinitionError(f"dt and duration must be positive, got {self.dt}, {self.duration}")
        if self.dof < 1:
            raise DefinitionError(f"dof is 1-based, got {self.dof}")
        if self.noise_ratio < 0:
            raise DefinitionError(f"noise ratio must be >= 0, got {self.noise_ratio}")

    @property
    def labels(self) -> List[str]:
        return [c.label for c in self.classes]

    @property
    def n_samples(self) -> int:
        return int(round(self.duration / self.dt)) + 1

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "system": self.system,
            "classes": [c.to_dict() for c in self.classes],
            "dt": self.dt,
            "duration": self.duration,
            "dof": self.dof,
            "channel": self.channel,
            "fuse": self.fuse,
            "noise_ratio": self.noise_ratio,
            "counts": self.counts.to_dict(),
            "network": self.network,
            "train": self.train.to_dict(),
            "seed": self.seed,
            "total_accel": self.total_accel,
            "disp_source": self.disp_source,
            "normalize_input": self.normalize_input,
            "excitation": copy.deepcopy(self.excitation),
            "system_params": copy.deepcopy(self.system_params),
            "kalman": copy.deepcopy(self.kalman),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RunConfig":
        try:
            return cls(
                name=str(data.get("name", "")),
                description=str(data.get("description", "")),
                system=data["system"],
                classes=[ClassDef.from_dict(c) for c in data["classes"]],
                dt=float(data["dt"]),
                duration=float(data["duration"]),
                dof=int(data.get("dof", 1)),
                channel=data.get("channel", "disp"),
                fuse=bool(data.get("fuse", False)),
                noise_ratio=float(data.get("noise_ratio", 0.1)),
                counts=Counts(**data.get("counts", {})),
                network=data.get("network", "desk-scale"),
                train=TrainConfig.from_dict(data.get("train", {})),
                seed=int(data.get("seed", 0)),
                total_accel=bool(data.get("total_accel", False)),
                disp_source=data.get("disp_source", "measured"),
                normalize_input=bool(data.get("normalize_input", False)),
                excitation=dict(data.get("excitation", {})),
                system_params=dict(data.get("system_params", {})),
                kalman=dict(data.get("kalman", {})),
            )
        except (KeyError, TypeError) as e:
            raise DefinitionError(f"malformed run configuration: {e!r}") from e

    @classmethod
    def from_preset(cls, name: str, overrides: Optional[Mapping[str, Any]] = None, config_manager=None) -> "RunConfig":
        """Resolve an experiment preset and apply overrides (config file, then CLI flags)."""
        if config_manager is None:
            from src.config.config import ConfigManager
            config_manager = ConfigManager()
        data = config_manager.experiment(name)
        data = deep_merge(data, {"name": name})
        return cls.from_dict(deep_merge(data, overrides or {}))


@dataclass
class Prediction:
    """Classification result for one signal."""
    name: str
    predicted_label: str
    probs: List[float]
    true_label: Optional[str] = None

    @property
    def correct(self) -> Optional[bool]:
        if self.true_label is None:
            return None
        return self.true_label == self.predicted_label


@dataclass
class EvaluationReport:
    """Per-signal predictions with per-class tallies and overall accuracy."""
    classes: List[str]
    predictions: List[Prediction] = field(default_factory=list)
    network: str = ""

    def add(self, prediction: Prediction) -> None:
        self.predictions.append(prediction)

    @property
    def labeled(self) -> List[Prediction]:
        return [p for p in self.predictions if p.true_label is not None]

    @property
    def total(self) -> int:
        return len(self.labeled)

    @property
    def correct(self) -> int:
        return sum(1 for p in self.labeled if p.correct)

    @property
    def accuracy(self) -> Optional[float]:
        """Correct over labeled predictions; None when nothing is labeled."""
        if not self.labeled:
            return None
        return self.correct / self.total

    def per_class(self) -> Dict[str, Dict[str, int]]:
        tally = {c: {"correct": 0, "incorrect": 0} for c in self.classes}
        for p in self.labeled:
            tally[p.true_label]["correct" if p.correct else "incorrect"] += 1
        return tally

    def confusion(self) -> np.ndarray:
        """Counts indexed [true class, predicted class]."""
        matrix = np.zeros((len(self.classes), len(self.classes)), dtype=int)
        for p in self.labeled:
            matrix[self.classes.index(p.true_label), self.classes.index(p.predicted_label)] += 1
        return matrix
