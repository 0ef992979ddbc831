"""
Gradient-check workflow: backpropagation against central differences on random small networks.
"""
from typing import List

from loguru import logger

from src.models.network import GradCheckReport, LossKind
from src.orchestrator.base import PipelineWorkflow
from src.services.cnn_service import grad_check, random_network
from src.utils.errors import NumericalError
from src.utils.seeds import generate_seeds


class GradCheckWorkflow(PipelineWorkflow):
    """Fails with a numerical error (exit code 2) when any network exceeds the tolerance."""

    title = "gradcheck"

    def __init__(self, networks: int = 20, seed: int = 0, tol: float = 1e-4, h: float = 1e-5):
        super().__init__()
        self.networks = networks
        self.seed = seed
        self.tol = tol
        self.h = h
        self.reports: List[GradCheckReport] = []

    def _execute(self) -> None:
        failed = []
        for i, net_seed in enumerate(generate_seeds(self.seed, self.networks)):
            spec, params, example = random_network(net_seed)
            # alternate losses so both gradient paths are covered
            loss_kind = LossKind.CROSS_ENTROPY if i % 2 == 0 else LossKind.MSE
            report = grad_check(spec, params, example, h=self.h, tol=self.tol, loss_kind=loss_kind)
            self.reports.append(report)
            status = "ok" if report.passed else "FAIL"
            logger.info(f"network {i + 1}/{self.networks} ({len(spec.layers)} layers, {loss_kind.value}): "
                        f"max rel error {report.max_rel_error:.2e} over {report.checked} coordinates "
                        f"({report.skipped} skipped) {status}")
            if not report.passed:
                failed.append(i)

        worst = max(r.max_rel_error for r in self.reports) if self.reports else 0.0
        logger.info(f"worst relative error {worst:.2e} (tolerance {self.tol:.0e})")
        if failed:
            raise NumericalError(f"gradient check exceeded tolerance on networks {failed}")
