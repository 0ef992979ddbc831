"""
Reproduce workflow: simulate, fuse, train and evaluate one named study.
"""
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

from loguru import logger

from src.config.config import ConfigManager
from src.models.run import RunConfig, deep_merge
from src.orchestrator.base import PipelineWorkflow
from src.orchestrator.evaluate_workflow import EvaluateWorkflow
from src.orchestrator.fuse_workflow import FuseWorkflow
from src.orchestrator.simulate_workflow import SimulateWorkflow
from src.orchestrator.train_workflow import PAPER_SCALE, TrainWorkflow
from src.repositories.report_repository import ReportRepository


class ReproduceWorkflow(PipelineWorkflow):
    """
    Flow:
    1. Simulate the experiment dataset (bundle/raw)
    2. Fuse it when the study compares raw and filtered signals (bundle/fused)
    3. For each network preset and each dataset: train, then evaluate the test split
    4. Write bundle/summary.json

    Bundle layout:
        raw/, fused/                     datasets with manifest.json and run.json
        <network>/<raw|fused>/           weights.json, train_report.csv, evaluation.csv(+summary)
        summary.json
    """

    title = "reproduce"

    def __init__(
        self,
        preset: str,
        out_dir: Path,
        overrides: Optional[Mapping[str, Any]] = None,
        paper_scale: bool = False,
        workers: int = 1,
        config_manager: Optional[ConfigManager] = None,
    ):
        super().__init__()
        self.preset = preset
        self.out_dir = Path(out_dir)
        self.overrides = dict(overrides or {})
        self.paper_scale = paper_scale
        self.workers = workers
        self.config_manager = config_manager or ConfigManager()
        self.report_repo = ReportRepository()
        self.results: List[Dict[str, Any]] = []

    def resolve(self) -> RunConfig:
        study = self.config_manager.reproduction(self.preset)
        study_overrides = {k: v for k, v in study.items() if k not in ("experiment", "networks")}
        return RunConfig.from_preset(study["experiment"], deep_merge(study_overrides, self.overrides), self.config_manager)

    def networks(self) -> List[str]:
        if self.paper_scale:
            return [PAPER_SCALE]
        return list(self.config_manager.reproduction(self.preset).get("networks", ["desk-scale"]))

    def _execute(self) -> None:
        run = self.resolve()
        logger.info(f"study '{self.preset}': experiment '{run.name}', channel '{run.channel}', "
                    f"fuse={run.fuse}, networks {self.networks()}")

        datasets = {"raw": self._step_simulate(run)}
        if run.fuse:
            datasets["fused"] = self._step_fuse(datasets["raw"], run)

        for network in self.networks():
            for variant, manifest_path in datasets.items():
                self._step_train_and_evaluate(network, variant, manifest_path)

        self._step_summary(run)

    def _sub(self, workflow: PipelineWorkflow) -> None:
        if not workflow.run():
            raise workflow.error

    def _step_simulate(self, run: RunConfig) -> Path:
        logger.info("Step 1: simulate")
        simulate = SimulateWorkflow(run, self.out_dir / "raw", workers=self.workers)
        self._sub(simulate)
        return simulate.manifest_path

    def _step_fuse(self, manifest_path: Path, run: RunConfig) -> Path:
        logger.info("Step 2: fuse")
        fuse = FuseWorkflow(manifest_path, self.out_dir / "fused", kalman=run.kalman)
        self._sub(fuse)
        return fuse.fused_manifest_path

    def _step_train_and_evaluate(self, network: str, variant: str, manifest_path: Path) -> None:
        logger.info(f"Step 3: {network} on {variant} signals")
        net_dir = self.out_dir / network / variant
        train = TrainWorkflow(manifest_path, net_dir, network=network, paper_scale=self.paper_scale,
                              config_manager=self.config_manager)
        self._sub(train)
        evaluate = EvaluateWorkflow(train.weights_path, manifest_path, net_dir / "evaluation.csv")
        self._sub(evaluate)

        report = evaluate.report
        self.results.append({
            "network": network,
            "signals": variant,
            "test_total": report.total,
            "test_correct": report.correct,
            "test_accuracy": report.accuracy,
            "per_class": report.per_class(),
            "initial_loss": train.report.initial_loss,
            "final_loss": train.report.final_loss,
            "final_val_acc": train.report.final_val_acc,
            "iterations_to_90": train.report.iterations_to_accuracy(0.9),
        })

    def _step_summary(self, run: RunConfig) -> None:
        logger.info("Step 4: write summary")
        path = self.report_repo.save_json(
            {"preset": self.preset, "run": run.to_dict(), "results": self.results},
            self.out_dir / "summary.json",
        )
        for r in self.results:
            logger.info(f"{r['network']}/{r['signals']}: {r['test_correct']}/{r['test_total']} correct")
        logger.info(f"bundle: {path.parent}")
