"""
System definitions and Kalman filter settings as JSON.
"""
import json
from pathlib import Path
from typing import Any, Dict, Optional, Union

from src.models.kalman import KfConfig
from src.models.system import FreeFallSystem, GenDampedSystem, RayleighBuilding, ShearBuilding
from src.utils.errors import DefinitionError, ShapeError

PathLike = Union[str, Path]
SystemDefinition = Union[GenDampedSystem, FreeFallSystem, ShearBuilding, RayleighBuilding]

_SYSTEM_TYPES = {
    "gendamp": GenDampedSystem,
    "freefall": FreeFallSystem,
    "boucwen": ShearBuilding,
    "rayleigh": RayleighBuilding,
}


def _read_json(path: PathLike) -> Dict[str, Any]:
    path = Path(path)
    if not path.is_file():
        raise DefinitionError(f"definition file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise DefinitionError(f"malformed JSON in {path}: {e.msg} at line {e.lineno}") from e


class SystemRepository:

    def parse_system(self, data: Dict[str, Any]) -> SystemDefinition:
        """
        Build a system from its JSON form.

        A definition without "type" but with M, C and K is a convolution-damped system.
        """
        kind = data.get("type") or ("gendamp" if {"M", "C", "K"} <= set(data) else None)
        if kind not in _SYSTEM_TYPES:
            raise DefinitionError(f"unknown system type {kind!r}, expected one of {sorted(_SYSTEM_TYPES)}")
        try:
            return _SYSTEM_TYPES[kind].from_dict(data)
        except (KeyError, TypeError) as e:
            raise DefinitionError(f"malformed {kind} definition: missing or invalid {e}") from e

    def load_system(self, path: PathLike) -> SystemDefinition:
        return self.parse_system(_read_json(path))

    def save_system(self, system: SystemDefinition, path: PathLike) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(system.to_dict(), f, indent=2)
            f.write("\n")
        return path

    def load_kf_config(self, path: PathLike, dt: Optional[float] = None) -> KfConfig:
        """Parse {dt, Qd_scale, Rd, disp_decimation, x0, P0_scale}; an explicit dt wins."""
        data = _read_json(path)
        if dt is None and "dt" not in data:
            raise DefinitionError(f"Kalman config {path} has no dt and none was given")
        try:
            return KfConfig.from_dict(data, dt=dt)
        except (TypeError, ValueError, ShapeError) as e:
            if isinstance(e, DefinitionError):
                raise
            raise DefinitionError(f"malformed Kalman config {path}: {e}") from e
