"""
Trained network weights and training reports.
"""
import json
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
import pandas as pd
from loguru import logger

from src.models.network import (
    NetworkParams,
    NetworkSpec,
    TrainConfig,
    TrainRecord,
    TrainReport,
)
from src.utils.errors import ShapeError, ShmClassNetError

PathLike = Union[str, Path]
FORMAT_VERSION = 1
REPORT_COLUMNS = ["iteration", "epoch", "train_loss", "train_acc", "val_acc"]


class WeightsRepository:
    """
    Weights file:
        {format_version, spec, layers: [{type, shapes, values}], train_config, seeds, meta}
    TrainReport CSV:
        iteration,epoch,train_loss,train_acc,val_acc (val_acc empty between epochs)
    """

    def save_weights(
        self,
        path: PathLike,
        spec: NetworkSpec,
        params: NetworkParams,
        train_config: Optional[TrainConfig] = None,
        seeds: Optional[Dict[str, int]] = None,
        meta: Optional[Dict[str, Any]] = None,
    ) -> Path:
        params.check(spec)
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        layers = [
            {
                "type": layer.kind.value,
                "shapes": {k: list(v.shape) for k, v in group.items()},
                "values": {k: v.tolist() for k, v in group.items()},
            }
            for layer, group in zip(spec.layers, params.layers)
        ]
        document = {
            "format_version": FORMAT_VERSION,
            "spec": spec.to_dict(),
            "layers": layers,
            "train_config": train_config.to_dict() if train_config else None,
            "seeds": seeds or {},
            "meta": meta or {},
        }
        with open(path, "w", encoding="utf-8") as f:
            json.dump(document, f)
            f.write("\n")
        logger.debug(f"weights saved: {path} ({params.num_trainable(spec)} trainable values)")
        return path

    def load_weights(self, path: PathLike) -> Tuple[NetworkSpec, NetworkParams, Dict[str, Any]]:
        """
        Returns:
            (spec, params, document minus the layer values)
        """
        path = Path(path)
        if not path.is_file():
            raise ShmClassNetError(f"weights file not found: {path}")
        try:
            with open(path, "r", encoding="utf-8") as f:
                document = json.load(f)
        except json.JSONDecodeError as e:
            raise ShmClassNetError(f"malformed weights file {path}: {e.msg} at line {e.lineno}") from e
        if document.get("format_version") != FORMAT_VERSION:
            raise ShmClassNetError(f"unsupported weights format_version {document.get('format_version')!r}")

        spec = NetworkSpec.from_dict(document["spec"])
        groups = []
        for i, (layer, entry) in enumerate(zip(spec.layers, document["layers"])):
            if entry["type"] != layer.kind.value:
                raise ShapeError(f"weights layer {i} is '{entry['type']}', spec says '{layer.kind.value}'")
            groups.append({
                k: np.array(v, dtype=np.float64).reshape(entry["shapes"][k])
                for k, v in entry["values"].items()
            })
        params = NetworkParams(groups)
        params.check(spec)
        header = {k: v for k, v in document.items() if k != "layers"}
        return spec, params, header

    def save_train_report(self, report: TrainReport, path: PathLike) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        frame = pd.DataFrame(
            [[r.iteration, r.epoch, r.train_loss, r.train_acc, r.val_acc] for r in report.records],
            columns=REPORT_COLUMNS,
        )
        frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
        return path

    def load_train_report(self, path: PathLike) -> TrainReport:
        frame = pd.read_csv(path)
        if list(frame.columns) != REPORT_COLUMNS:
            raise ShmClassNetError(f"train report {path} has columns {list(frame.columns)}, expected {REPORT_COLUMNS}")
        records = [
            TrainRecord(
                iteration=int(row.iteration),
                epoch=int(row.epoch),
                train_loss=float(row.train_loss),
                train_acc=float(row.train_acc),
                val_acc=None if pd.isna(row.val_acc) else float(row.val_acc),
            )
            for row in frame.itertuples(index=False)
        ]
        return TrainReport(records=records)
