from .signal import (
    Split,
    Channel,
    TimeSeries,
    NoiseModel,
    Provenance,
    LabeledSignal,
    ManifestEntry,
    DatasetManifest,
)
from .kernel import KernelKind, KernelSpec
from .system import (
    GenDampedSystem,
    ContactMode,
    FreeFallSystem,
    BoucWenKind,
    BoucWenVariant,
    ShearBuilding,
    RayleighBuilding,
)
from .kalman import KfState, KfConfig, KfStepTrace
from .network import (
    LayerKind,
    LayerOrder,
    LossKind,
    Mode,
    LayerSpec,
    NetworkSpec,
    NetworkParams,
    GradientSet,
    ForwardCache,
    LrSchedule,
    TrainConfig,
    LabeledExample,
    TrainRecord,
    TrainReport,
    GradCheckReport,
)
from .run import ClassDef, Counts, RunConfig, Prediction, EvaluationReport

__all__ = [
    "Split",
    "Channel",
    "TimeSeries",
    "NoiseModel",
    "Provenance",
    "LabeledSignal",
    "ManifestEntry",
    "DatasetManifest",
    "KernelKind",
    "KernelSpec",
    "GenDampedSystem",
    "ContactMode",
    "FreeFallSystem",
    "BoucWenKind",
    "BoucWenVariant",
    "ShearBuilding",
    "RayleighBuilding",
    "KfState",
    "KfConfig",
    "KfStepTrace",
    "LayerKind",
    "LayerOrder",
    "LossKind",
    "Mode",
    "LayerSpec",
    "NetworkSpec",
    "NetworkParams",
    "GradientSet",
    "ForwardCache",
    "LrSchedule",
    "TrainConfig",
    "LabeledExample",
    "TrainRecord",
    "TrainReport",
    "GradCheckReport",
    "ClassDef",
    "Counts",
    "RunConfig",
    "Prediction",
    "EvaluationReport",
]
