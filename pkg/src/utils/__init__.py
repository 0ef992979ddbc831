from .logger import setup_logger, get_logger
from .errors import (
    ShmClassNetError,
    SignalError,
    SignalParseError,
    ManifestError,
    ShapeError,
    NumericalError,
    DefinitionError,
)
from .seeds import derive_seed, generate_seeds

__all__ = [
    "setup_logger",
    "get_logger",
    "ShmClassNetError",
    "SignalError",
    "SignalParseError",
    "ManifestError",
    "ShapeError",
    "NumericalError",
    "DefinitionError",
    "derive_seed",
    "generate_seeds",
]
