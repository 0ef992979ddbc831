"""
Simulate workflow: generate a labeled dataset from a run configuration.
"""
import dataclasses
from pathlib import Path
from typing import Optional

from loguru import logger

from src.models.run import RunConfig
from src.models.signal import Split
from src.orchestrator.base import PipelineWorkflow, save_run
from src.services.dataset_service import DatasetService


class SimulateWorkflow(PipelineWorkflow):
    """
    Flow:
    1. Simulate every (class, split, index) signal with derived seeds
    2. Write signals, manifest and run.json
    """

    title = "simulate"

    def __init__(self, run: RunConfig, out_dir: Path, workers: int = 1):
        super().__init__()
        self.run_config = run
        self.out_dir = Path(out_dir)
        self.dataset_service = DatasetService(workers=workers)
        self.manifest_path: Optional[Path] = None
        self.manifest = None

    def _execute(self) -> None:
        run = self.run_config
        logger.info(f"experiment '{run.name}': {run.system}, classes {run.labels}, dt={run.dt}, "
                    f"duration={run.duration}, dof={run.dof}, noise={run.noise_ratio}, seed={run.seed}")
        self._step_generate()
        self._step_save_run()

    def _step_generate(self) -> None:
        logger.info("Step 1: simulate signals")
        self.manifest_path, self.manifest = self.dataset_service.generate(self.run_config, self.out_dir)
        for split in Split:
            logger.info(f"{split.value}: {self.manifest.counts(split)}")

    def _step_save_run(self) -> None:
        logger.info("Step 2: store run configuration")
        # raw signals; the fuse stage marks its own output
        save_run(dataclasses.replace(self.run_config, fuse=False), self.out_dir)
