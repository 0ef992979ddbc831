import copy
import sys

import numpy as np
import pytest
from loguru import logger

from src.config.config import ConfigManager
from src.models.network import LayerOrder, NetworkSpec
from src.models.run import RunConfig

# Short gendamp run: one signal per class and split, two epochs on the small network
TINY_OVERRIDES = {
    "duration": 2.0,
    "counts": {"train": 1, "validate": 1, "test": 1},
    "network": "sensitivity",
    "train": {"epochs": 2},
}


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def config_manager():
    return ConfigManager()


@pytest.fixture
def tiny_overrides():
    return copy.deepcopy(TINY_OVERRIDES)


@pytest.fixture
def tiny_run(config_manager):
    return RunConfig.from_preset("linear3", TINY_OVERRIDES, config_manager)


@pytest.fixture
def small_spec():
    """Two conv blocks (kernel 3, 4 and 6 channels), three classes."""
    return NetworkSpec.conv_blocks(in_channels=1, num_classes=3, kernel_length=3, channels=[4, 6],
                                   order=LayerOrder.BN_RELU, name="small")


@pytest.fixture
def isolated_env(tmp_path, monkeypatch):
    """Point logs and default outputs at the test's temp directory."""
    monkeypatch.setenv("SHMCLASSNET_LOG_DIR", str(tmp_path / "logs"))
    monkeypatch.setenv("SHMCLASSNET_OUT_DIR", str(tmp_path / "runs"))
    monkeypatch.setenv("SHMCLASSNET_WORKERS", "1")
    monkeypatch.setenv("SHMCLASSNET_LOG_LEVEL", "INFO")
    yield tmp_path
    # the CLI installs a file sink inside tmp_path
    logger.remove()
    logger.add(sys.stderr)
