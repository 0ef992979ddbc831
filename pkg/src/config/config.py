import copy
import json
import os
from pathlib import Path
from typing import Any, Dict, List, Optional

# Load .env file from project root
from dotenv import load_dotenv

from src.utils.errors import DefinitionError

# Find project root (where .env is located)
_current_file = Path(__file__).resolve()
_project_root = _current_file.parent.parent.parent  # src/config/config.py -> project root
_env_path = _project_root / ".env"
load_dotenv(_env_path)


class ConfigManager:
    """
    Named presets for experiments, reproductions, network sizes and Kalman defaults.
    """

    def __init__(self, presets_path: Optional[str] = None):
        # Get the directory where config.py is located
        current_dir = os.path.dirname(os.path.abspath(__file__))

        presets_path = presets_path or os.path.join(current_dir, "presets.json")
        with open(presets_path, "r", encoding="utf-8") as f:
            self.config = json.load(f)

        self.networks: Dict[str, dict] = self.config["networks"]
        self.experiments: Dict[str, dict] = self.config["experiments"]
        self.reproductions: Dict[str, dict] = self.config["reproductions"]
        self.train_defaults: dict = self.config["train"]

    def experiment(self, name: str) -> dict:
        """
        Experiment preset with the shared train and Kalman defaults filled in.

        Args:
            name: Preset name, e.g. "linear3"

        Returns:
            A fresh dict that callers may modify
        """
        if name not in self.experiments:
            raise DefinitionError(f"unknown experiment preset '{name}', expected one of {sorted(self.experiments)}")
        data = copy.deepcopy(self.experiments[name])
        data.setdefault("train", copy.deepcopy(self.train_defaults))
        data.setdefault("kalman", self.kalman_defaults())
        return data

    def reproduction(self, name: str) -> dict:
        if name not in self.reproductions:
            raise DefinitionError(f"unknown reproduction preset '{name}', expected one of {sorted(self.reproductions)}")
        return copy.deepcopy(self.reproductions[name])

    def network_preset(self, name: str) -> dict:
        if name not in self.networks:
            raise DefinitionError(f"unknown network preset '{name}', expected one of {sorted(self.networks)}")
        return copy.deepcopy(self.networks[name])

    def kalman_defaults(self) -> dict:
        return copy.deepcopy(self.config["kalman"])

    @staticmethod
    def load_overrides(path: Optional[str]) -> dict:
        """Read a `--config` JSON file; None gives no overrides."""
        if not path:
            return {}
        if not os.path.isfile(path):
            raise DefinitionError(f"config file not found: {path}")
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise DefinitionError(f"malformed config file {path}: {e.msg} at line {e.lineno}") from e
        if not isinstance(data, dict):
            raise DefinitionError(f"config file {path} must hold a JSON object")
        return data

    def experiment_names(self) -> List[str]:
        return sorted(self.experiments)

    def reproduction_names(self) -> List[str]:
        return sorted(self.reproductions)


class SettingsManager:
    """
    Process settings from environment variables (after .env is loaded).
    """

    def __init__(self):
        self.log_dir = os.getenv("SHMCLASSNET_LOG_DIR", "logs")
        self.log_level = os.getenv("SHMCLASSNET_LOG_LEVEL", "DEBUG").upper()
        self.out_dir = os.getenv("SHMCLASSNET_OUT_DIR", "runs")
        self.workers = self._int_env("SHMCLASSNET_WORKERS", 1)

    @staticmethod
    def _int_env(key: str, default: int) -> int:
        raw = os.getenv(key)
        if raw is None or raw.strip() == "":
            return default
        try:
            value = int(raw)
        except ValueError:
            raise DefinitionError(f"{key} must be an integer, got '{raw}'") from None
        return max(1, value)

    @property
    def log_file(self) -> str:
        return str(Path(self.log_dir) / "shmclassnet.log")

    def as_dict(self) -> Dict[str, Any]:
        return {
            "log_dir": self.log_dir,
            "log_level": self.log_level,
            "out_dir": self.out_dir,
            "workers": self.workers,
        }
