"""
Signal files (CSV + JSON sidecar) and dataset manifests on disk.
"""
import json
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np
import pandas as pd
from loguru import logger

from src.models.signal import Channel, DatasetManifest, LabeledSignal, ManifestEntry, Provenance, TimeSeries
from src.utils.errors import ManifestError, SignalError, SignalParseError

PathLike = Union[str, Path]
FORMAT_VERSION = 1
FLOAT_FORMAT = "%.17g"


def meta_path_for(csv_path: PathLike) -> Path:
    """`<name>.csv` -> `<name>.meta.json`"""
    csv_path = Path(csv_path)
    return csv_path.with_name(csv_path.stem + ".meta.json")


class SignalRepository:
    """
    Reads and writes labeled signals.

    Layout per signal:
        <name>.csv        header `t,<ch0>,<ch1>,...`, one row per sample
        <name>.meta.json  {format_version, dt, label, channels, provenance}
    """

    def write_signal(self, labeled: LabeledSignal, path: PathLike) -> Path:
        """
        Write a labeled signal and its sidecar.

        Args:
            labeled: Signal, label and provenance
            path: Target CSV path

        Returns:
            The CSV path
        """
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        series = labeled.signal

        frame = pd.DataFrame(series.data.T, columns=series.channel_names)
        frame.insert(0, "t", series.times())
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")

        meta = {
            "format_version": FORMAT_VERSION,
            "dt": series.dt,
            "t0": series.t0,
            "label": labeled.label,
            "channels": [{"name": c.name, "unit": c.unit} for c in series.channels],
            "provenance": labeled.provenance.to_dict(),
        }
        with open(meta_path_for(path), "w", encoding="utf-8") as f:
            json.dump(meta, f, indent=2, sort_keys=False)
            f.write("\n")
        return path

    def read_signal(self, path: PathLike) -> LabeledSignal:
        """
        Read a labeled signal written by write_signal.

        Raises:
            SignalParseError: missing or malformed CSV/sidecar (names path, line, field)
        """
        path = Path(path)
        if not path.is_file():
            raise SignalParseError("missing signal file", path=str(path))
        meta = self._read_meta(path)

        try:
            frame = pd.read_csv(path, dtype=str, keep_default_na=False)
        except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
            raise SignalParseError(f"unreadable CSV: {e}", path=str(path)) from e

        names = [c["name"] for c in meta["channels"]]
        expected_header = ["t", *names]
        if list(frame.columns) != expected_header:
            raise SignalParseError(
                f"CSV header {list(frame.columns)} does not match metadata channels {expected_header}",
                path=str(path), line=1,
            )
        if frame.empty:
            raise SignalParseError("empty signal", path=str(path), line=2)

        values = np.empty((len(expected_header), len(frame)))
        for col, name in enumerate(expected_header):
            numeric = pd.to_numeric(frame[name], errors="coerce").to_numpy(dtype=np.float64)
            bad = np.flatnonzero(~np.isfinite(numeric))
            if bad.size:
                # header is line 1
                raise SignalParseError(f"invalid number '{frame[name].iloc[bad[0]]}'", path=str(path),
                                       line=int(bad[0]) + 2, field=name)
            values[col] = numeric

        dt = meta["dt"]
        if values.shape[1] > 1 and not np.allclose(np.diff(values[0]), dt, rtol=1e-9, atol=1e-12):
            raise SignalParseError(f"time column is not uniformly spaced at dt={dt}", path=str(path), field="t")

        try:
            series = TimeSeries(
                dt=dt,
                channels=tuple(Channel(c["name"], c.get("unit", "")) for c in meta["channels"]),
                data=values[1:],
                t0=meta.get("t0", float(values[0, 0])),
            )
        except SignalError as e:
            raise SignalParseError(str(e), path=str(path)) from e
        return LabeledSignal(
            signal=series,
            label=meta["label"],
            provenance=Provenance.from_dict(meta.get("provenance") or {}),
            name=path.stem,
        )

    def _read_meta(self, csv_path: Path) -> dict:
        meta_path = meta_path_for(csv_path)
        if not meta_path.is_file():
            raise SignalParseError("missing metadata", path=str(meta_path))
        try:
            with open(meta_path, "r", encoding="utf-8") as f:
                meta = json.load(f)
        except json.JSONDecodeError as e:
            raise SignalParseError(f"malformed JSON: {e.msg}", path=str(meta_path), line=e.lineno) from e

        if not isinstance(meta, dict):
            raise SignalParseError("metadata must be a JSON object", path=str(meta_path), line=1)
        if meta.get("format_version") != FORMAT_VERSION:
            raise SignalParseError(f"unsupported format_version {meta.get('format_version')!r}",
                                   path=str(meta_path), field="format_version")
        for key in ("dt", "label", "channels"):
            if key not in meta:
                raise SignalParseError("missing field", path=str(meta_path), field=key)
        if not isinstance(meta["dt"], (int, float)) or not meta["dt"] > 0:
            raise SignalParseError(f"dt must be a positive number, got {meta['dt']!r}", path=str(meta_path), field="dt")
        if not isinstance(meta["channels"], list) or not all(isinstance(c, dict) and "name" in c for c in meta["channels"]):
            raise SignalParseError("channels must be a list of {name, unit}", path=str(meta_path), field="channels")
        return meta

    def write_manifest(self, manifest: DatasetManifest, path: PathLike) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(manifest.to_dict(), f, indent=2)
            f.write("\n")
        logger.debug(f"manifest written: {path} ({len(manifest.entries)} entries)")
        return path

    def read_manifest(self, path: PathLike, check_files: bool = True) -> DatasetManifest:
        """
        Load a manifest; entry paths are relative to the manifest's directory.

        Raises:
            ManifestError: malformed manifest, or an entry whose file does not exist
        """
        path = Path(path)
        if not path.is_file():
            raise ManifestError(f"manifest not found: {path}")
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ManifestError(f"malformed manifest {path}: {e.msg} at line {e.lineno}") from e
        manifest = DatasetManifest.from_dict(data)
        if check_files:
            for entry in manifest.entries:
                target = self.resolve(path, entry)
                if not target.is_file():
                    raise ManifestError(f"manifest entry points to a missing file: {target}")
        return manifest

    @staticmethod
    def resolve(manifest_path: PathLike, entry: ManifestEntry) -> Path:
        entry_path = Path(entry.path)
        return entry_path if entry_path.is_absolute() else Path(manifest_path).parent / entry_path

    def load_split(self, manifest_path: PathLike, manifest: DatasetManifest, split) -> List[Tuple[ManifestEntry, LabeledSignal]]:
        """Read every signal of one split, in manifest order."""
        return [(e, self.read_signal(self.resolve(manifest_path, e))) for e in manifest.split(split)]
