"""
Fuse workflow: Kalman-filter every signal of a dataset.
"""
import dataclasses
from pathlib import Path
from typing import Any, Dict, Optional

from loguru import logger

from src.orchestrator.base import PipelineWorkflow, load_run, save_run
from src.services.dataset_service import DatasetService


class FuseWorkflow(PipelineWorkflow):
    """
    Flow:
    1. Filter each signal (acceleration + displacement -> displacement, velocity)
    2. Write the filtered dataset with the same manifest shape
    """

    title = "fuse"

    def __init__(self, manifest_path: Path, out_dir: Path, kalman: Optional[Dict[str, Any]] = None):
        super().__init__()
        self.manifest_path = Path(manifest_path)
        self.out_dir = Path(out_dir)
        self.kalman = kalman
        self.dataset_service = DatasetService()
        self.fused_manifest_path: Optional[Path] = None

    def _execute(self) -> None:
        run = load_run(self.manifest_path.parent)
        kalman = self.kalman
        if kalman is None:
            kalman = run.kalman if run is not None else {}
        logger.info(f"Step 1: filter {self.manifest_path} with {kalman or 'default settings'}")
        self.fused_manifest_path, manifest = self.dataset_service.fuse_dataset(self.manifest_path, self.out_dir, kalman)
        logger.info(f"{len(manifest.entries)} filtered signals")

        if run is not None:
            logger.info("Step 2: store run configuration")
            # acceleration passes through unfiltered
            fused = run.channel != "accel"
            save_run(dataclasses.replace(run, fuse=fused, kalman=dict(kalman)), self.out_dir)
