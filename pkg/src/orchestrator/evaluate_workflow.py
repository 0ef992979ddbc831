"""
Evaluate and classify workflows: run a trained network over stored signals.
"""
from pathlib import Path
from typing import Optional, Sequence

from loguru import logger

from src.models.run import EvaluationReport
from src.models.signal import Split
from src.orchestrator.base import PipelineWorkflow
from src.repositories.report_repository import ReportRepository
from src.repositories.signal_repository import SignalRepository
from src.repositories.weights_repository import WeightsRepository
from src.services.evaluation_service import EvaluationService, prediction_table, summary_table


def _load_service(weights_path: Path):
    spec, params, header = WeightsRepository().load_weights(weights_path)
    meta = header.get("meta", {})
    classes = meta.get("classes") or [str(i) for i in range(spec.num_classes)]
    return EvaluationService(spec, params, classes, network=meta.get("network_preset", spec.name)), meta


class EvaluateWorkflow(PipelineWorkflow):
    """
    Flow:
    1. Load weights and the labeled split
    2. Classify every signal and tally per class
    3. Write the report CSV and summary; print the table

    The outcome does not depend on the accuracy reached.
    """

    title = "evaluate"

    def __init__(self, weights_path: Path, manifest_path: Path, out_path: Path,
                 split: str = "test", channel: Optional[str] = None):
        super().__init__()
        self.weights_path = Path(weights_path)
        self.manifest_path = Path(manifest_path)
        self.out_path = Path(out_path)
        self.split = Split(split)
        self.channel = channel
        self.signal_repo = SignalRepository()
        self.report_repo = ReportRepository()
        self.report: Optional[EvaluationReport] = None

    def output_dir(self) -> Path:
        return self.out_path.parent

    def _execute(self) -> None:
        logger.info(f"Step 1: load {self.weights_path} and the {self.split.value} split of {self.manifest_path}")
        service, meta = _load_service(self.weights_path)
        manifest = self.signal_repo.read_manifest(self.manifest_path)
        signals = [s for _, s in self.signal_repo.load_split(self.manifest_path, manifest, self.split)]
        channel = self.channel or meta.get("channel", "disp")

        logger.info(f"Step 2: classify {len(signals)} signals on channel '{channel}'")
        self.report = service.evaluate(signals, channel, bool(meta.get("normalize_input", False)))

        logger.info(f"Step 3: write {self.out_path}")
        self.report_repo.save_evaluation(self.report, self.out_path)
        print(summary_table(self.report))


class ClassifyWorkflow(PipelineWorkflow):
    """
    Flow:
    1. Load weights and the given signal files
    2. Predict a class per signal; labels outside the class list count as unlabeled
    3. Write and print the predictions
    """

    title = "classify"

    def __init__(self, weights_path: Path, signal_paths: Sequence[Path], out_path: Path,
                 channel: Optional[str] = None):
        super().__init__()
        self.weights_path = Path(weights_path)
        self.signal_paths = [Path(p) for p in signal_paths]
        self.out_path = Path(out_path)
        self.channel = channel
        self.signal_repo = SignalRepository()
        self.report_repo = ReportRepository()
        self.report: Optional[EvaluationReport] = None

    def output_dir(self) -> Path:
        return self.out_path.parent

    def _execute(self) -> None:
        logger.info(f"Step 1: load {self.weights_path} and {len(self.signal_paths)} signals")
        service, meta = _load_service(self.weights_path)
        signals = [self.signal_repo.read_signal(p) for p in self.signal_paths]
        channel = self.channel or meta.get("channel", "disp")

        logger.info(f"Step 2: classify on channel '{channel}'")
        self.report = service.evaluate(signals, channel, bool(meta.get("normalize_input", False)))

        logger.info(f"Step 3: write {self.out_path}")
        self.report_repo.save_evaluation(self.report, self.out_path)
        print(prediction_table(self.report.predictions, self.report.classes))
        if self.report.accuracy is not None:
            print(summary_table(self.report))
