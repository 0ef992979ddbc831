"""
Evaluation reports and reproduction bundle summaries.
"""
import json
from pathlib import Path
from typing import Any, Dict, Union

import pandas as pd

from src.models.run import EvaluationReport, Prediction

PathLike = Union[str, Path]


class ReportRepository:

    def evaluation_frame(self, report: EvaluationReport) -> pd.DataFrame:
        """One row per signal: name, true/predicted label, correctness and class probabilities."""
        rows = []
        for p in report.predictions:
            row = {
                "signal": p.name,
                "true_label": p.true_label if p.true_label is not None else "",
                "predicted_label": p.predicted_label,
                "correct": "" if p.correct is None else int(p.correct),
            }
            row.update({f"p_{c}": prob for c, prob in zip(report.classes, p.probs)})
            rows.append(row)
        columns = ["signal", "true_label", "predicted_label", "correct", *[f"p_{c}" for c in report.classes]]
        return pd.DataFrame(rows, columns=columns)

    def save_evaluation(self, report: EvaluationReport, path: PathLike) -> Path:
        """Write the per-signal CSV plus a `<stem>.summary.json` with tallies and accuracy."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.evaluation_frame(report).to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
        summary = {
            "network": report.network,
            "classes": report.classes,
            "total": report.total,
            "correct": report.correct,
            "accuracy": report.accuracy,
            "per_class": report.per_class(),
            "confusion": report.confusion().tolist(),
        }
        self.save_json(summary, path.with_name(path.stem + ".summary.json"))
        return path

    def load_evaluation(self, path: PathLike) -> EvaluationReport:
        frame = pd.read_csv(path, dtype={"signal": str, "true_label": str, "predicted_label": str},
                            keep_default_na=False)
        classes = [c[2:] for c in frame.columns if c.startswith("p_")]
        report = EvaluationReport(classes=classes)
        for row in frame.to_dict(orient="records"):
            report.add(Prediction(
                name=row["signal"],
                predicted_label=row["predicted_label"],
                probs=[float(row[f"p_{c}"]) for c in classes],
                true_label=row["true_label"] or None,
            ))
        return report

    @staticmethod
    def save_json(data: Dict[str, Any], path: PathLike) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(data, f, indent=2)
            f.write("\n")
        return path
