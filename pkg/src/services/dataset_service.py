"""
Dataset assembly: simulate labeled signals per class and split, add
measurement noise, write signals and the manifest, fuse whole datasets and
load network examples back.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from loguru import logger

from src.models.kalman import KfConfig
from src.models.kernel import KernelSpec
from src.models.network import LabeledExample
from src.models.run import RunConfig
from src.models.signal import (
    UNIT_ACCEL,
    UNIT_DISP,
    UNIT_VEL,
    DatasetManifest,
    LabeledSignal,
    NoiseModel,
    Provenance,
    Split,
    TimeSeries,
)
from src.models.system import (
    BoucWenVariant,
    ContactMode,
    FreeFallSystem,
    GenDampedSystem,
    RayleighBuilding,
    ShearBuilding,
)
from src.repositories.signal_repository import SignalRepository
from src.services import gendamp_service, kalman_service, newmark_service, nonlinear_service
from src.services.signal_service import add_measurement_noise, double_integrate, zscore
from src.utils.errors import DefinitionError, NumericalError, SignalError
from src.utils.logger import get_logger
from src.utils.seeds import derive_seed

PathLike = Union[str, Path]
GRAVITY = 9.81

SPLIT_CODES = {Split.TRAIN: 0, Split.VALIDATE: 1, Split.TEST: 2}
# Seed purposes under one signal
EXCITATION, NOISE, GROUND_MOTION = 0, 1, 2

MEASURED_CHANNELS = ("disp", "vel", "accel")


@dataclass(frozen=True)
class SignalJob:
    """Identity of one generated signal."""
    class_index: int
    label: str
    split: Split
    index: int

    @property
    def name(self) -> str:
        return f"{self.label}_{self.split.value}_{self.index:03d}"

    @property
    def relpath(self) -> str:
        return f"{self.split.value}/{self.name}.csv"


def build_system(run: RunConfig, class_index: int):
    """System definition of one model class."""
    cls = run.classes[class_index]
    p = dict(run.system_params)
    name = f"{run.name}/{cls.label}" if run.name else cls.label
    if run.system == "gendamp":
        return GenDampedSystem(
            M=p.get("M", gendamp_service.EXPERIMENT_M),
            C=p.get("C", gendamp_service.EXPERIMENT_C),
            K=p.get("K", gendamp_service.EXPERIMENT_K),
            kernel=KernelSpec.from_dict(cls.params["kernel"]),
            name=name,
        )
    if run.system == "freefall":
        keys = ("m", "c", "k", "gravity", "force_variance", "contact_level")
        return FreeFallSystem(kernel=KernelSpec.from_dict(cls.params["kernel"]), name=name,
                              **{k: float(p[k]) for k in keys if k in p})
    if run.system == "boucwen":
        shape = {k: p[k] for k in ("A", "beta", "gamma", "n") if k in p}
        variant = BoucWenVariant.from_dict({**shape, **cls.params.get("variant", {})})
        return ShearBuilding(variant=variant, stories=int(p.get("stories", 6)), m=p.get("m", 1.0),
                             k=p.get("k", 9.0), c=p.get("c", 0.25), name=name)
    return RayleighBuilding(alpha_m=float(cls.params["alpha_m"]), alpha_k=float(cls.params.get("alpha_k", 0.0)),
                            stories=int(p.get("stories", 2)), m=p.get("m", 1.0), k=p.get("k", 900.0), name=name)


def _dof_count(system) -> int:
    if isinstance(system, GenDampedSystem):
        return system.n
    if isinstance(system, FreeFallSystem):
        return 1
    return system.stories


def _spread(base, spread: float, rng: np.random.Generator) -> np.ndarray:
    base = np.asarray(base, dtype=np.float64)
    return base * (1.0 + spread * rng.uniform(-1.0, 1.0, size=base.shape))


def _ground_motion(run: RunConfig, job: SignalJob) -> Tuple[TimeSeries, float, int]:
    """Ground record for a job; train/validate motions are shared across classes."""
    exc = run.excitation
    code = SPLIT_CODES[job.split]
    shared = exc.get("shared_ground_motions", True) and job.split is not Split.TEST
    seed = (derive_seed(run.seed, code, job.index, GROUND_MOTION) if shared
            else derive_seed(run.seed, job.class_index, code, job.index, GROUND_MOTION))
    peaks = exc.get("train_peaks_g", [0.827])
    low, high = exc.get("test_peak_range_g", [0.3, 1.1])
    if job.split is Split.TRAIN:
        peak_g = peaks[job.index % len(peaks)]
    else:
        peak_g = float(np.random.default_rng(seed).uniform(low, high))
    record = nonlinear_service.synth_ground_motion(seed, run.duration, run.dt, peak_g * GRAVITY)
    return record, peak_g, seed


def simulate_clean(run: RunConfig, job: SignalJob) -> Tuple[TimeSeries, Dict[str, Any], Optional[np.ndarray], Tuple[float, float]]:
    """
    Noise-free response of one job.

    Returns:
        (full response, provenance params, ground acceleration or None, (x0, v0) of the selected DOF)
    """
    system = build_system(run, job.class_index)
    if run.dof > _dof_count(system):
        raise DefinitionError(f"dof {run.dof} exceeds the {_dof_count(system)} DOFs of {run.system}")
    code = SPLIT_CODES[job.split]
    exc_seed = derive_seed(run.seed, job.class_index, code, job.index, EXCITATION)
    rng = np.random.default_rng(exc_seed)
    exc = run.excitation
    params: Dict[str, Any] = {"class": run.classes[job.class_index].to_dict(), "dof": run.dof}
    ground = None

    if isinstance(system, GenDampedSystem):
        if exc.get("use_initial_conditions", True):
            x0 = _spread(exc.get("x0", np.zeros(system.n)), exc.get("ic_spread", 0.0), rng)
            v0 = _spread(exc.get("v0", np.zeros(system.n)), exc.get("ic_spread", 0.0), rng)
        else:
            x0, v0 = np.zeros(system.n), np.zeros(system.n)
        force = None
        if exc.get("use_force", True):
            force = gendamp_service.white_noise_force(system.n, exc.get("force_variance", 9.0), run.dt,
                                                      run.duration, derive_seed(exc_seed, 1))
        response = gendamp_service.simulate_gendamp(system, force, x0, v0, run.dt, run.duration)
        params.update(x0=x0.tolist(), v0=v0.tolist(), force=force is not None)
        ic = (float(x0[run.dof - 1]), float(v0[run.dof - 1]))
    elif isinstance(system, FreeFallSystem):
        x0 = float(_spread(exc.get("x0", 0.1), exc.get("ic_spread", 0.0), rng))
        v0 = float(exc.get("v0", 0.0))
        response = nonlinear_service.simulate_freefall(
            system, run.dt, run.duration, derive_seed(exc_seed, 1), x0=x0, v0=v0,
            contact=ContactMode(exc.get("contact", "auto")), force_noise=exc.get("use_force_noise", True),
        )
        params.update(x0=x0, v0=v0)
        ic = (x0, v0)
    else:
        record, peak_g, gm_seed = _ground_motion(run, job)
        ground = record.values()
        if isinstance(system, ShearBuilding):
            response = nonlinear_service.simulate_shear_boucwen(system, record, total_accel=run.total_accel)
        else:
            response = newmark_service.simulate_rayleigh_building(system, record, total_accel=run.total_accel)
        params.update(peak_g=peak_g, ground_motion_seed=gm_seed)
        ic = (0.0, 0.0)
    return response, params, ground, ic


def make_signal(run: RunConfig, job: SignalJob) -> LabeledSignal:
    """Simulate, pick the DOF, add noise and assemble the stored channels."""
    response, params, ground, (x0, v0) = simulate_clean(run, job)
    d = run.dof
    clean = response.select(f"disp_{d}", f"vel_{d}", f"accel_{d}")
    noise_seed = derive_seed(run.seed, job.class_index, SPLIT_CODES[job.split], job.index, NOISE)
    noisy = add_measurement_noise(clean, NoiseModel(run.noise_ratio, noise_seed)).data

    disp, vel, accel = noisy
    if run.disp_source == "integrated":
        relative = accel - ground if (ground is not None and run.total_accel) else accel
        disp = double_integrate(relative, x0=x0, v0=v0, dt=run.dt).values("disp")

    columns = {
        "disp": (UNIT_DISP, disp),
        "vel": (UNIT_VEL, vel),
        "accel": (UNIT_ACCEL, accel),
        "disp_true": (UNIT_DISP, clean.values(f"disp_{d}")),
        "vel_true": (UNIT_VEL, clean.values(f"vel_{d}")),
    }
    if ground is not None:
        columns["ground_accel"] = (UNIT_ACCEL, ground)
    params.update(disp_source=run.disp_source, total_accel=run.total_accel)
    return LabeledSignal(
        signal=TimeSeries.from_channels(run.dt, columns),
        label=job.label,
        provenance=Provenance(system=f"{run.system}:{run.name}", seed=noise_seed, params=params,
                              noise_ratio=run.noise_ratio, filtered=False),
        name=job.name,
    )


def _run_job(run_dict: Dict[str, Any], job: SignalJob) -> LabeledSignal:
    # Worker entry point; RunConfig travels as a dict
    return make_signal(RunConfig.from_dict(run_dict), job)


class DatasetService:
    """Generates, fuses and loads labeled datasets."""

    def __init__(self, repository: Optional[SignalRepository] = None, workers: int = 1):
        self.repository = repository or SignalRepository()
        self.workers = max(1, int(workers))

    @staticmethod
    def jobs(run: RunConfig) -> List[SignalJob]:
        counts = {Split.TRAIN: run.counts.train, Split.VALIDATE: run.counts.validate, Split.TEST: run.counts.test}
        return [
            SignalJob(ci, cls.label, split, j)
            for split in (Split.TRAIN, Split.VALIDATE, Split.TEST)
            for ci, cls in enumerate(run.classes)
            for j in range(counts[split])
        ]

    def generate(self, run: RunConfig, out_dir: PathLike) -> Tuple[Path, DatasetManifest]:
        """
        Simulate every signal of a run and write the dataset.

        Returns:
            (manifest path, manifest)
        """
        out_dir = Path(out_dir)
        jobs = self.jobs(run)
        logger.info(f"simulating {len(jobs)} signals for '{run.name}' ({run.system}, {len(run.classes)} classes)")

        if self.workers > 1:
            with ProcessPoolExecutor(max_workers=self.workers) as pool:
                futures = [pool.submit(_run_job, run.to_dict(), job) for job in jobs]
                signals = [self._collect(f.result, job) for f, job in zip(futures, jobs)]
        else:
            signals = [self._collect(lambda job=job: make_signal(run, job), job) for job in jobs]

        manifest = DatasetManifest(classes=run.labels)
        for job, labeled in zip(jobs, signals):
            self.repository.write_signal(labeled, out_dir / job.relpath)
            manifest.add(job.relpath, job.label, job.split)
        manifest_path = self.repository.write_manifest(manifest, out_dir / "manifest.json")
        logger.success(f"dataset written: {manifest_path}")
        return manifest_path, manifest

    @staticmethod
    def _collect(produce, job: SignalJob) -> LabeledSignal:
        try:
            return produce()
        except NumericalError as e:
            get_logger(job.name).error(f"{job.relpath}: {e}")
            raise e.with_signal(job.name) from e

    def fuse_dataset(self, manifest_path: PathLike, out_dir: PathLike, kalman: Dict[str, Any]) -> Tuple[Path, DatasetManifest]:
        """
        Write Kalman-filtered counterparts of every signal in a dataset.

        The filtered signal replaces disp and vel with the estimates and keeps
        the other channels; its provenance is marked filtered.
        """
        manifest_path = Path(manifest_path)
        out_dir = Path(out_dir)
        manifest = self.repository.read_manifest(manifest_path)
        for entry in manifest.entries:
            labeled = self.repository.read_signal(self.repository.resolve(manifest_path, entry))
            try:
                fused = self.fuse_signal(labeled, kalman)
            except NumericalError as e:
                raise e.with_signal(entry.path) from e
            self.repository.write_signal(fused, out_dir / entry.path)
        fused_manifest = DatasetManifest(classes=list(manifest.classes), entries=list(manifest.entries))
        path = self.repository.write_manifest(fused_manifest, out_dir / "manifest.json")
        logger.success(f"fused dataset written: {path}")
        return path, fused_manifest

    @staticmethod
    def fuse_signal(labeled: LabeledSignal, kalman: Dict[str, Any]) -> LabeledSignal:
        series = labeled.signal
        if not series.has_channel("accel"):
            raise SignalError(f"signal '{labeled.name}' has no acceleration channel to fuse")
        accel = series.values("accel")
        if series.has_channel("ground_accel") and labeled.provenance.params.get("total_accel"):
            accel = accel - series.values("ground_accel")
        if series.has_channel("disp"):
            disp = series.values("disp")
        else:
            disp = double_integrate(accel, dt=series.dt).values("disp")

        cfg = KfConfig.from_dict(kalman, dt=series.dt)
        disp_series = TimeSeries.from_channels(series.dt * cfg.disp_decimation, {"disp": (UNIT_DISP, disp[::cfg.disp_decimation])},
                                               t0=series.t0)
        accel_series = TimeSeries.from_channels(series.dt, {"accel": (UNIT_ACCEL, accel)}, t0=series.t0)
        estimate = kalman_service.fuse_signals(accel_series, disp_series, cfg)

        data = series.data.copy()
        for name in ("disp", "vel"):
            if series.has_channel(name):
                data[series.index(name)] = estimate.values(name)
        fused = series.with_data(data)
        missing = [n for n in ("disp", "vel") if not series.has_channel(n)]
        if missing:
            fused = fused.merged(estimate.select(*missing))
        provenance = Provenance.from_dict({**labeled.provenance.to_dict(), "filtered": True})
        provenance.params = {**provenance.params, "kalman": cfg.to_dict()}
        return LabeledSignal(signal=fused, label=labeled.label, provenance=provenance, name=labeled.name)

    def load_examples(
        self,
        manifest_path: PathLike,
        manifest: DatasetManifest,
        split: Union[Split, str],
        channel: str,
        normalize: bool = False,
    ) -> List[LabeledExample]:
        """Network examples of one split: the selected channel as a 1-channel input."""
        examples = []
        for entry, labeled in self.repository.load_split(manifest_path, manifest, split):
            examples.append(to_example(labeled, channel, manifest.class_index(entry.label), len(manifest.classes), normalize))
        return examples


def to_example(labeled: LabeledSignal, channel: str, class_index: int, num_classes: int,
               normalize: bool = False) -> LabeledExample:
    x = labeled.signal.values(channel)[np.newaxis, :]
    if normalize:
        x = zscore(x)
    return LabeledExample.from_index(x, class_index, num_classes, name=labeled.name)


def signal_input(labeled: LabeledSignal, channel: str, normalize: bool = False) -> np.ndarray:
    x = labeled.signal.values(channel)[np.newaxis, :]
    return zscore(x) if normalize else x
