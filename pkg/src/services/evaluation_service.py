"""
Classification of stored signals and accuracy reports.
"""
from typing import Iterable, List, Optional, Sequence

import pandas as pd
from loguru import logger

from src.models.network import NetworkParams, NetworkSpec
from src.models.run import EvaluationReport, Prediction
from src.models.signal import LabeledSignal
from src.services.cnn_service import classify
from src.services.dataset_service import signal_input
from src.utils.errors import ShapeError


class EvaluationService:
    """Runs a trained network over signals and tallies the results."""

    def __init__(self, spec: NetworkSpec, params: NetworkParams, classes: Sequence[str], network: str = ""):
        if len(classes) != spec.num_classes:
            raise ShapeError(f"{len(classes)} class labels for a network with {spec.num_classes} outputs")
        params.check(spec)
        self.spec = spec
        self.params = params
        self.classes = list(classes)
        self.network = network or spec.name

    def predict(self, labeled: LabeledSignal, channel: str, normalize: bool = False) -> Prediction:
        """Classify one signal; its label counts as ground truth only if it is one of the classes."""
        index, probs = classify(self.spec, self.params, signal_input(labeled, channel, normalize))
        true_label = labeled.label if labeled.label in self.classes else None
        return Prediction(
            name=labeled.name,
            predicted_label=self.classes[index],
            probs=[float(p) for p in probs],
            true_label=true_label,
        )

    def evaluate(self, signals: Iterable[LabeledSignal], channel: str, normalize: bool = False) -> EvaluationReport:
        report = EvaluationReport(classes=self.classes, network=self.network)
        for labeled in signals:
            prediction = self.predict(labeled, channel, normalize)
            report.add(prediction)
            logger.debug(f"{prediction.name}: {prediction.predicted_label} (true {prediction.true_label})")
        if report.accuracy is not None:
            logger.info(f"accuracy {report.correct}/{report.total} = {report.accuracy:.3f}")
        return report


def summary_table(report: EvaluationReport) -> str:
    """Per-class correct/incorrect counts with a total row."""
    per_class = report.per_class()
    frame = pd.DataFrame.from_dict(per_class, orient="index", columns=["correct", "incorrect"])
    frame.loc["total"] = frame.sum()
    frame["accuracy"] = frame["correct"] / (frame["correct"] + frame["incorrect"]).where(lambda s: s > 0)
    return frame.to_string(float_format=lambda v: f"{v:.3f}")


def prediction_table(predictions: List[Prediction], classes: Optional[Sequence[str]] = None) -> str:
    rows = []
    for p in predictions:
        row = {"signal": p.name, "predicted": p.predicted_label, "true": p.true_label or "-"}
        if classes:
            row.update({f"p_{c}": prob for c, prob in zip(classes, p.probs)})
        rows.append(row)
    return pd.DataFrame(rows).to_string(index=False, float_format=lambda v: f"{v:.4f}")
