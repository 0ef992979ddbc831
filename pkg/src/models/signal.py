"""
Signal data models: uniformly sampled time series and labeled datasets.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from src.utils.errors import ManifestError, SignalError


class Split(Enum):
    """Dataset split an entry belongs to."""
    TRAIN = "train"
    VALIDATE = "validate"
    TEST = "test"


# Channel units used by the simulators
UNIT_DISP = "m"
UNIT_VEL = "m/s"
UNIT_ACCEL = "m/s^2"
UNIT_FORCE = "N"


@dataclass(frozen=True)
class Channel:
    """Name and unit of one signal channel."""
    name: str
    unit: str = ""


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """
    Uniformly sampled multi-channel signal.

    `data` is stored as a read-only float64 array of shape (channels, samples).
    """
    dt: float
    channels: Tuple[Channel, ...]
    data: np.ndarray
    t0: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise SignalError(f"dt must be positive, got {self.dt}")

        channels = tuple(c if isinstance(c, Channel) else Channel(*c) for c in self.channels)
        data = np.array(self.data, dtype=np.float64, copy=True)
        if data.ndim == 1:
            data = data[np.newaxis, :]
        if data.ndim != 2:
            raise SignalError(f"data must be (channels, samples), got shape {data.shape}")
        if data.shape[1] == 0:
            raise SignalError("empty signal")
        if data.shape[0] != len(channels):
            raise SignalError(f"{len(channels)} channel names for {data.shape[0]} data rows")
        if len({c.name for c in channels}) != len(channels):
            raise SignalError(f"duplicate channel names: {[c.name for c in channels]}")
        if not np.all(np.isfinite(data)):
            bad = np.argwhere(~np.isfinite(data))[0]
            raise SignalError(f"nonfinite sample in channel '{channels[bad[0]].name}' at index {bad[1]}")

        data.setflags(write=False)
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "t0", float(self.t0))

    @classmethod
    def from_channels(cls, dt: float, columns: Mapping[str, Tuple[str, Sequence[float]]], t0: float = 0.0) -> "TimeSeries":
        """Build from {name: (unit, values)} in insertion order."""
        channels = tuple(Channel(name, unit) for name, (unit, _) in columns.items())
        data = np.vstack([np.asarray(values, dtype=np.float64) for _, values in columns.values()])
        return cls(dt=dt, channels=channels, data=data, t0=t0)

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def channel_names(self) -> List[str]:
        return [c.name for c in self.channels]

    @property
    def duration(self) -> float:
        return self.dt * (self.n_samples - 1)

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_samples)

    def has_channel(self, name: str) -> bool:
        return name in self.channel_names

    def index(self, name: str) -> int:
        try:
            return self.channel_names.index(name)
        except ValueError:
            raise SignalError(f"channel '{name}' not in {self.channel_names}") from None

    def values(self, name: Optional[str] = None) -> np.ndarray:
        """Samples of one channel (the only channel when name is omitted)."""
        if name is None:
            if self.n_channels != 1:
                raise SignalError(f"expected a single-channel signal, got {self.channel_names}")
            return self.data[0]
        return self.data[self.index(name)]

    def select(self, *names: str) -> "TimeSeries":
        """Sub-signal with the given channels, in the given order."""
        rows = [self.index(n) for n in names]
        return TimeSeries(dt=self.dt, channels=tuple(self.channels[r] for r in rows), data=self.data[rows], t0=self.t0)

    def with_data(self, data: np.ndarray) -> "TimeSeries":
        """Same grid and channels, new samples."""
        return TimeSeries(dt=self.dt, channels=self.channels, data=data, t0=self.t0)

    def merged(self, other: "TimeSeries") -> "TimeSeries":
        """Concatenate the channels of two signals sampled on the same grid."""
        if other.n_samples != self.n_samples or not np.isclose(other.dt, self.dt):
            raise SignalError("cannot merge signals sampled on different grids")
        return TimeSeries(
            dt=self.dt,
            channels=self.channels + other.channels,
            data=np.vstack([self.data, other.data]),
            t0=self.t0,
        )

    def allclose(self, other: "TimeSeries", atol: float = 1e-10) -> bool:
        return (
            self.channels == other.channels
            and self.data.shape == other.data.shape
            and np.isclose(self.dt, other.dt, rtol=0, atol=1e-15)
            and np.allclose(self.data, other.data, rtol=0, atol=atol)
        )


@dataclass(frozen=True)
class NoiseModel:
    """RMS noise-to-signal ratio and the seed of the noise draw."""
    ratio: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not self.ratio >= 0:
            raise SignalError(f"noise ratio must be >= 0, got {self.ratio}")


@dataclass
class Provenance:
    """Where a signal came from."""
    system: str = ""
    seed: Optional[int] = None
    params: Dict[str, Any] = field(default_factory=dict)
    noise_ratio: float = 0.0
    filtered: bool = False

    def to_dict(self) -> dict:
        return {
            "system": self.system,
            "seed": self.seed,
            "params": self.params,
            "noise_ratio": self.noise_ratio,
            "filtered": self.filtered,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Provenance":
        return cls(
            system=data.get("system", ""),
            seed=data.get("seed"),
            params=dict(data.get("params") or {}),
            noise_ratio=float(data.get("noise_ratio", 0.0)),
            filtered=bool(data.get("filtered", False)),
        )


@dataclass
class LabeledSignal:
    """A signal with its model-class label."""
    signal: TimeSeries
    label: str
    provenance: Provenance = field(default_factory=Provenance)
    name: str = ""


@dataclass(frozen=True)
class ManifestEntry:
    """One signal file in a dataset."""
    path: str
    label: str
    split: Split

    def to_dict(self) -> dict:
        return {"path": self.path, "label": self.label, "split": self.split.value}


@dataclass
class DatasetManifest:
    """Labeled signal collection with train/validate/test splits."""
    classes: List[str]
    entries: List[ManifestEntry] = field(default_factory=list)

    def __post_init__(self):
        if len(set(self.classes)) != len(self.classes):
            raise ManifestError(f"duplicate class labels: {self.classes}")
        for entry in self.entries:
            self._check_label(entry)

    def _check_label(self, entry: ManifestEntry) -> None:
        if entry.label not in self.classes:
            raise ManifestError(f"entry {entry.path} has label '{entry.label}' outside classes {self.classes}")

    def add(self, path: str, label: str, split: Union[Split, str]) -> ManifestEntry:
        entry = ManifestEntry(path=path, label=label, split=Split(split))
        self._check_label(entry)
        self.entries.append(entry)
        return entry

    def split(self, split: Union[Split, str]) -> List[ManifestEntry]:
        split = Split(split)
        return [e for e in self.entries if e.split is split]

    def class_index(self, label: str) -> int:
        try:
            return self.classes.index(label)
        except ValueError:
            raise ManifestError(f"label '{label}' not in classes {self.classes}") from None

    def counts(self, split: Union[Split, str]) -> Dict[str, int]:
        tally = {c: 0 for c in self.classes}
        for entry in self.split(split):
            tally[entry.label] += 1
        return tally

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "classes": list(self.classes),
            "entries": [e.to_dict() for e in self.entries],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "DatasetManifest":
        if data.get("format_version") != 1:
            raise ManifestError(f"unsupported manifest format_version {data.get('format_version')!r}")
        try:
            entries = [
                ManifestEntry(path=e["path"], label=e["label"], split=Split(e["split"]))
                for e in data["entries"]
            ]
            return cls(classes=list(data["classes"]), entries=entries)
        except (KeyError, ValueError, TypeError) as e:
            raise ManifestError(f"malformed manifest: {e}") from e

