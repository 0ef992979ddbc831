"""
Train workflow: fit a network to the train split of a dataset.
"""
import dataclasses
import os
from pathlib import Path
from typing import Optional

from loguru import logger

from src.config.config import ConfigManager
from src.models.network import NetworkParams, NetworkSpec, TrainConfig, TrainReport
from src.models.run import RunConfig
from src.models.signal import Split
from src.orchestrator.base import PipelineWorkflow, load_run
from src.repositories.signal_repository import SignalRepository
from src.repositories.weights_repository import WeightsRepository
from src.services import cnn_service
from src.services.dataset_service import DatasetService
from src.utils.errors import DefinitionError
from src.utils.seeds import derive_seed

WEIGHTS_FILE = "weights.json"
REPORT_FILE = "train_report.csv"
PAPER_SCALE = "paper-scale"

# Seed purposes under the master seed
SHUFFLE_KEY, WEIGHT_INIT_KEY = 10, 11


def build_network(preset_name: str, num_classes: int, config_manager: ConfigManager) -> NetworkSpec:
    preset = config_manager.network_preset(preset_name)
    return NetworkSpec.conv_blocks(
        in_channels=1,
        num_classes=num_classes,
        kernel_length=int(preset["kernel_length"]),
        channels=list(preset["channels"]),
        order=preset.get("layer_order", "bn-relu"),
        name=preset_name,
    )


def seeded_train_config(run: RunConfig) -> TrainConfig:
    """Train settings with shuffle and init seeds tied to the run's master seed."""
    cfg = run.train
    return dataclasses.replace(
        cfg,
        shuffle_seed=derive_seed(run.seed, SHUFFLE_KEY, cfg.shuffle_seed),
        weight_init_seed=derive_seed(run.seed, WEIGHT_INIT_KEY, cfg.weight_init_seed),
    )


class TrainWorkflow(PipelineWorkflow):
    """
    Flow:
    1. Load train/validate examples of the selected channel
    2. Train the network by SGD
    3. Save weights and the per-iteration report
    """

    title = "train"

    def __init__(
        self,
        manifest_path: Path,
        out_dir: Path,
        run: Optional[RunConfig] = None,
        network: Optional[str] = None,
        paper_scale: bool = False,
        config_manager: Optional[ConfigManager] = None,
    ):
        super().__init__()
        self.manifest_path = Path(manifest_path)
        self.out_dir = Path(out_dir)
        self.run_config = run
        self.network = network
        self.paper_scale = paper_scale
        self.config_manager = config_manager or ConfigManager()
        self.signal_repo = SignalRepository()
        self.weights_repo = WeightsRepository()
        self.dataset_service = DatasetService(self.signal_repo)
        self.spec: Optional[NetworkSpec] = None
        self.params: Optional[NetworkParams] = None
        self.report: Optional[TrainReport] = None
        self.weights_path = self.out_dir / WEIGHTS_FILE
        self.report_path = self.out_dir / REPORT_FILE

    def _execute(self) -> None:
        run = self.run_config or load_run(self.manifest_path.parent)
        if run is None:
            raise DefinitionError(f"no run configuration given and no run.json beside {self.manifest_path}")
        self.run_config = run

        network = PAPER_SCALE if self.paper_scale else (self.network or run.network)
        if network == PAPER_SCALE:
            logger.warning("!" * 50)
            logger.warning("paper-scale network (kernel 2048, 128/256 channels): expect hours of CPU time")
            logger.warning("!" * 50)

        train_set, validate_set, classes = self._step_load(run)
        self.spec = build_network(network, len(classes), self.config_manager)
        self._step_train(run, train_set, validate_set)
        self._step_save(run, classes, network)

    def _step_load(self, run: RunConfig):
        logger.info(f"Step 1: load '{run.channel}' examples from {self.manifest_path}")
        manifest = self.signal_repo.read_manifest(self.manifest_path)
        train_set = self.dataset_service.load_examples(self.manifest_path, manifest, Split.TRAIN, run.channel, run.normalize_input)
        validate_set = self.dataset_service.load_examples(self.manifest_path, manifest, Split.VALIDATE, run.channel, run.normalize_input)
        logger.info(f"train {len(train_set)} / validate {len(validate_set)} signals, classes {manifest.classes}")
        return train_set, validate_set, list(manifest.classes)

    def _step_train(self, run: RunConfig, train_set, validate_set) -> None:
        cfg = seeded_train_config(run)
        logger.info(f"Step 2: train '{self.spec.name}' ({len(self.spec.layers)} layers), "
                    f"{cfg.epochs} epochs, lr {cfg.learning_rate}, batch {cfg.mini_batch}")
        self.params, self.report = cnn_service.train(self.spec, train_set, cfg, validate_set=validate_set)
        logger.info(f"loss {self.report.initial_loss:.4f} -> {self.report.final_loss:.4f}, "
                    f"final val_acc {self.report.final_val_acc}, "
                    f"90% train accuracy at iteration {self.report.iterations_to_accuracy(0.9)}")

    def _step_save(self, run: RunConfig, classes, network: str) -> None:
        logger.info(f"Step 3: save {self.weights_path}")
        cfg = self.report.config
        self.weights_repo.save_weights(
            self.weights_path,
            self.spec,
            self.params,
            train_config=cfg,
            seeds={"master": run.seed, "shuffle": cfg.shuffle_seed, "weight_init": cfg.weight_init_seed},
            meta={
                "experiment": run.name,
                "classes": classes,
                "channel": run.channel,
                "normalize_input": run.normalize_input,
                "fused": run.fuse,
                "network_preset": network,
                "manifest": os.path.relpath(self.manifest_path, self.out_dir),
            },
        )
        self.weights_repo.save_train_report(self.report, self.report_path)
