"""
1D convolutional network models: topology, parameters, caches and training records.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from src.utils.errors import DefinitionError, ShapeError

# A 1D tensor is a (channels, length) float64 array.
Tensor1D = np.ndarray


class LayerKind(Enum):
    CONV = "conv"
    RELU = "relu"
    BATCHNORM = "batchnorm"
    GAP = "global_avg_pool"
    FC = "fc"


class LossKind(Enum):
    CROSS_ENTROPY = "cross_entropy"
    MSE = "mse"


class LayerOrder(Enum):
    """Order of normalization and activation inside a convolution block."""
    BN_RELU = "bn-relu"
    RELU_BN = "relu-bn"


class Mode(Enum):
    TRAIN = "train"
    INFER = "infer"


# Trainable parameter names per layer kind
TRAINABLE = {
    LayerKind.CONV: ("weight", "bias"),
    LayerKind.BATCHNORM: ("gamma", "beta"),
    LayerKind.FC: ("weight", "bias"),
}


def as_tensor1d(x, name: str = "input") -> Tensor1D:
    """Validate and convert to a finite (channels, length) float64 array."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[np.newaxis, :]
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeError(f"{name} must be (channels >= 1, length >= 1), got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ShapeError(f"{name} contains nonfinite values")
    return arr


@dataclass(frozen=True)
class LayerSpec:
    """One layer of the network."""
    kind: LayerKind
    kernel_length: Optional[int] = None
    out_channels: Optional[int] = None
    padding: str = "causal"

    def __post_init__(self):
        object.__setattr__(self, "kind", LayerKind(self.kind))
        if self.kind is LayerKind.CONV:
            if not self.kernel_length or self.kernel_length < 1:
                raise DefinitionError(f"conv kernel_length must be >= 1, got {self.kernel_length}")
            if not self.out_channels or self.out_channels < 1:
                raise DefinitionError(f"conv out_channels must be >= 1, got {self.out_channels}")
            if self.padding != "causal":
                raise DefinitionError(f"only causal padding is supported, got '{self.padding}'")

    def to_dict(self) -> dict:
        d: Dict[str, Any] = {"kind": self.kind.value}
        if self.kind is LayerKind.CONV:
            d.update(kernel_length=self.kernel_length, out_channels=self.out_channels, padding=self.padding)
        return d

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "LayerSpec":
        return cls(
            kind=LayerKind(data["kind"]),
            kernel_length=data.get("kernel_length"),
            out_channels=data.get("out_channels"),
            padding=data.get("padding", "causal"),
        )


@dataclass(frozen=True)
class NetworkSpec:
    """Ordered layer list ending in global average pooling and a fully connected head."""
    in_channels: int
    num_classes: int
    layers: Tuple[LayerSpec, ...]
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if self.num_classes < 2:
            raise DefinitionError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.in_channels < 1:
            raise DefinitionError(f"in_channels must be >= 1, got {self.in_channels}")
        self.shapes()

    def shapes(self) -> List[int]:
        """Channel count entering each layer, plus the logits size at the end."""
        channels = self.in_channels
        pooled = False
        sizes = []
        for i, layer in enumerate(self.layers):
            sizes.append(channels)
            if layer.kind is LayerKind.FC:
                if not pooled or i != len(self.layers) - 1:
                    raise ShapeError("fc must be the last layer and follow global average pooling")
                channels = self.num_classes
            elif layer.kind is LayerKind.GAP:
                if pooled:
                    raise ShapeError("global average pooling appears twice")
                pooled = True
            elif pooled:
                raise ShapeError(f"{layer.kind.value} layer after global average pooling")
            elif layer.kind is LayerKind.CONV:
                channels = layer.out_channels
        if not self.layers or self.layers[-1].kind is not LayerKind.FC:
            raise ShapeError("network must end with an fc layer")
        sizes.append(channels)
        return sizes

    @property
    def conv_layers(self) -> List[LayerSpec]:
        return [l for l in self.layers if l.kind is LayerKind.CONV]

    @classmethod
    def conv_blocks(
        cls,
        in_channels: int,
        num_classes: int,
        kernel_length: int,
        channels: Sequence[int],
        order: LayerOrder = LayerOrder.BN_RELU,
        name: str = "",
    ) -> "NetworkSpec":
        """Conv blocks followed by global average pooling and the fc head."""
        order = LayerOrder(order)
        layers: List[LayerSpec] = []
        for out in channels:
            layers.append(LayerSpec(LayerKind.CONV, kernel_length=kernel_length, out_channels=out))
            if order is LayerOrder.BN_RELU:
                layers += [LayerSpec(LayerKind.BATCHNORM), LayerSpec(LayerKind.RELU)]
            else:
                layers += [LayerSpec(LayerKind.RELU), LayerSpec(LayerKind.BATCHNORM)]
        layers += [LayerSpec(LayerKind.GAP), LayerSpec(LayerKind.FC)]
        return cls(in_channels=in_channels, num_classes=num_classes, layers=tuple(layers), name=name)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "in_channels": self.in_channels,
            "num_classes": self.num_classes,
            "layers": [l.to_dict() for l in self.layers],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "NetworkSpec":
        return cls(
            in_channels=int(data["in_channels"]),
            num_classes=int(data["num_classes"]),
            layers=tuple(LayerSpec.from_dict(l) for l in data["layers"]),
            name=data.get("name", ""),
        )


@dataclass
class NetworkParams:
    """
    Per-layer parameter dictionaries, aligned with NetworkSpec.layers.

    conv: weight (out, in, kernel_length), bias (out,)
    batchnorm: gamma, beta, running_mean, running_var (channels,)
    fc: weight (classes, channels), bias (classes,)
    relu / global_avg_pool: {}
    """
    layers: List[Dict[str, np.ndarray]]

    def copy(self) -> "NetworkParams":
        return NetworkParams([{k: v.copy() for k, v in layer.items()} for layer in self.layers])

    def iter_trainable(self, spec: NetworkSpec) -> Iterator[Tuple[int, str, np.ndarray]]:
        for i, layer in enumerate(spec.layers):
            for key in TRAINABLE.get(layer.kind, ()):
                yield i, key, self.layers[i][key]

    def num_trainable(self, spec: NetworkSpec) -> int:
        return sum(a.size for _, _, a in self.iter_trainable(spec))

    def check(self, spec: NetworkSpec) -> None:
        """Raise ShapeError unless every array matches the network layout."""
        if len(self.layers) != len(spec.layers):
            raise ShapeError(f"{len(self.layers)} parameter groups for {len(spec.layers)} layers")
        sizes = spec.shapes()
        for i, layer in enumerate(spec.layers):
            expected = expected_shapes(layer, sizes[i], spec.num_classes)
            got = {k: v.shape for k, v in self.layers[i].items()}
            if got != expected:
                raise ShapeError(f"layer {i} ({layer.kind.value}) expected shapes {expected}, got {got}")
        for i, layer in enumerate(spec.layers):
            if layer.kind is LayerKind.BATCHNORM and np.any(self.layers[i]["running_var"] < 0):
                raise ShapeError(f"layer {i} running variance is negative")

    def to_list(self) -> List[Dict[str, Any]]:
        return [{k: v.tolist() for k, v in layer.items()} for layer in self.layers]

    @classmethod
    def from_list(cls, data: Sequence[Mapping[str, Any]]) -> "NetworkParams":
        return cls([{k: np.array(v, dtype=np.float64) for k, v in layer.items()} for layer in data])


def expected_shapes(layer: LayerSpec, in_channels: int, num_classes: int) -> Dict[str, tuple]:
    if layer.kind is LayerKind.CONV:
        return {"weight": (layer.out_channels, in_channels, layer.kernel_length), "bias": (layer.out_channels,)}
    if layer.kind is LayerKind.BATCHNORM:
        return {k: (in_channels,) for k in ("gamma", "beta", "running_mean", "running_var")}
    if layer.kind is LayerKind.FC:
        return {"weight": (num_classes, in_channels), "bias": (num_classes,)}
    return {}


@dataclass
class GradientSet:
    """dE/d(parameter) for every trainable array, shaped like NetworkParams."""
    layers: List[Dict[str, np.ndarray]]

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(g)) for layer in self.layers for g in layer.values())


@dataclass
class ForwardCache:
    """Layer inputs and per-layer intermediates kept for backpropagation."""
    inputs: List[np.ndarray] = field(default_factory=list)
    aux: List[Dict[str, Any]] = field(default_factory=list)
    logits: Optional[np.ndarray] = None
    probs: Optional[np.ndarray] = None


@dataclass(frozen=True)
class LrSchedule:
    """Learning-rate schedule: constant, or step decay by `factor` every `every_n_epochs`."""
    kind: str = "constant"
    factor: float = 0.5
    every_n_epochs: int = 5

    def __post_init__(self):
        if self.kind not in ("constant", "step_decay"):
            raise DefinitionError(f"unknown lr schedule '{self.kind}'")
        if self.kind == "step_decay" and (not 0 < self.factor <= 1 or self.every_n_epochs < 1):
            raise DefinitionError("step decay needs 0 < factor <= 1 and every_n_epochs >= 1")

    def rate(self, base: float, epoch: int) -> float:
        """Learning rate for a zero-based epoch index."""
        if self.kind == "constant":
            return base
        return base * self.factor ** (epoch // self.every_n_epochs)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "factor": self.factor, "every_n_epochs": self.every_n_epochs}


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer settings (defaults follow the online, mini-batch 1 setup)."""
    epochs: int = 15
    mini_batch: int = 1
    learning_rate: float = 0.001
    lr_schedule: LrSchedule = field(default_factory=LrSchedule)
    loss: LossKind = LossKind.CROSS_ENTROPY
    shuffle_seed: int = 0
    weight_init_seed: int = 0
    momentum_bn: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "loss", LossKind(self.loss))
        if self.epochs < 1:
            raise DefinitionError(f"epochs must be >= 1, got {self.epochs}")
        if self.mini_batch < 1:
            raise DefinitionError(f"mini_batch must be >= 1, got {self.mini_batch}")
        if not self.learning_rate > 0:
            raise DefinitionError(f"learning rate must be > 0, got {self.learning_rate}")

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "mini_batch": self.mini_batch,
            "learning_rate": self.learning_rate,
            "lr_schedule": self.lr_schedule.to_dict(),
            "loss": self.loss.value,
            "shuffle_seed": self.shuffle_seed,
            "weight_init_seed": self.weight_init_seed,
            "momentum_bn": self.momentum_bn,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "TrainConfig":
        data = dict(data)
        if "lr_schedule" in data and not isinstance(data["lr_schedule"], LrSchedule):
            data["lr_schedule"] = LrSchedule(**data["lr_schedule"])
        return cls(**data)


@dataclass(frozen=True, eq=False)
class LabeledExample:
    """Network input with its one-hot target."""
    input: Tensor1D
    target: np.ndarray
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "input", as_tensor1d(self.input))
        target = np.asarray(self.target, dtype=np.float64)
        if target.ndim != 1 or np.count_nonzero(target == 1.0) != 1 or np.count_nonzero(target) != 1:
            raise ShapeError(f"target must be one-hot, got {target}")
        object.__setattr__(self, "target", target)

    @classmethod
    def from_index(cls, x, class_index: int, num_classes: int, name: str = "") -> "LabeledExample":
        target = np.zeros(num_classes)
        target[class_index] = 1.0
        return cls(input=x, target=target, name=name)

    @property
    def class_index(self) -> int:
        return int(np.argmax(self.target))


@dataclass
class TrainRecord:
    iteration: int
    epoch: int
    train_loss: float
    train_acc: float
    val_acc: Optional[float] = None


@dataclass
class TrainReport:
    """Per-iteration training history plus the run metadata."""
    records: List[TrainRecord] = field(default_factory=list)
    config: Optional[TrainConfig] = None
    train_size: int = 0
    validate_size: int = 0

    @property
    def initial_loss(self) -> float:
        return self.records[0].train_loss

    @property
    def final_loss(self) -> float:
        """Mean training loss over the last epoch."""
        last = self.records[-1].epoch
        losses = [r.train_loss for r in self.records if r.epoch == last]
        return float(np.mean(losses))

    @property
    def final_val_acc(self) -> Optional[float]:
        for record in reversed(self.records):
            if record.val_acc is not None:
                return record.val_acc
        return None

    def iterations_to_accuracy(self, threshold: float = 0.9) -> Optional[int]:
        """
        First iteration whose trailing training accuracy reaches the threshold.

        Records before the end of the first epoch are skipped: their window
        holds fewer than one epoch of examples.
        """
        if not self.records:
            return None
        first_epoch = self.records[0].epoch
        start = max(i for i, r in enumerate(self.records) if r.epoch == first_epoch)
        for record in self.records[start:]:
            if record.train_acc >= threshold:
                return record.iteration
        return None


@dataclass
class GradCheckReport:
    """Finite-difference comparison of analytic gradients."""
    max_rel_error: float
    worst: Optional[Tuple[int, str, Tuple[int, ...]]]
    checked: int
    tol: float
    violations: List[Tuple[int, str, Tuple[int, ...], float]] = field(default_factory=list)
    skipped: int = 0

    @property
    def passed(self) -> bool:
        return not self.violations
