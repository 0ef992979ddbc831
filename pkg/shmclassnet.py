"""
Model-class selection from structural responses.

Commands:
    simulate    generate a labeled dataset from an experiment preset
    fuse        Kalman-filter a dataset (acceleration + displacement)
    train       train the 1D CNN on a dataset's train split
    classify    predict the model class of signal files
    evaluate    score a trained network on a dataset split
    reproduce   run simulate -> fuse -> train -> evaluate for a study preset
    gradcheck   compare backpropagation with finite differences

Usage:
    python shmclassnet.py simulate --preset linear3 --out runs/linear3/raw
    python shmclassnet.py fuse --manifest runs/linear3/raw/manifest.json --out runs/linear3/fused
    python shmclassnet.py train --manifest runs/linear3/fused/manifest.json --out runs/linear3/net
    python shmclassnet.py evaluate --weights runs/linear3/net/weights.json --manifest runs/linear3/fused/manifest.json
    python shmclassnet.py classify --weights runs/linear3/net/weights.json signal_a.csv signal_b.csv
    python shmclassnet.py reproduce --preset fig2
    python shmclassnet.py gradcheck --networks 20

Exit codes: 0 success, 1 usage/configuration/I-O error, 2 numerical failure.
"""
# Load .env FIRST before any other imports
from pathlib import Path
from dotenv import load_dotenv
_project_root = Path(__file__).resolve().parent
load_dotenv(_project_root / ".env")

import argparse
import sys
from contextlib import nullcontext
from typing import Any, Dict, Optional

from loguru import logger

from src.config.config import ConfigManager, SettingsManager
from src.models.run import RunConfig, deep_merge
from src.orchestrator import (
    ClassifyWorkflow,
    EvaluateWorkflow,
    FuseWorkflow,
    GradCheckWorkflow,
    ReproduceWorkflow,
    SimulateWorkflow,
    TrainWorkflow,
)
from src.orchestrator.base import load_run
from src.utils.errors import DefinitionError, NumericalError, ShmClassNetError
from src.utils.logger import run_log, setup_logger


class CliParser(argparse.ArgumentParser):
    """Usage errors exit with code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def cli_overrides(args) -> Dict[str, Any]:
    """RunConfig overrides from flags; unset flags are None and get skipped by deep_merge."""
    return {
        "seed": getattr(args, "seed", None),
        "channel": getattr(args, "channel", None),
        "total_accel": True if getattr(args, "total_accel", False) else None,
        "disp_source": getattr(args, "disp_source", None),
    }


def resolve_run(args, config_manager: ConfigManager, base: Optional[RunConfig] = None) -> RunConfig:
    """Preset (or an existing run), then --config file, then flags."""
    overrides = deep_merge(ConfigManager.load_overrides(args.config), cli_overrides(args))
    if args.preset:
        return RunConfig.from_preset(args.preset, overrides, config_manager)
    if base is not None:
        return RunConfig.from_dict(deep_merge(base.to_dict(), overrides))
    raise DefinitionError("--preset is required")


def add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--preset", "-p", type=str, help="experiment preset (e.g. linear3, freefall2, boucwen3, rayleigh2)")
    parser.add_argument("--config", "-c", type=str, help="JSON file overriding preset fields")
    parser.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    parser.add_argument("--channel", choices=["disp", "vel", "accel"], help="signal channel fed to the network")
    parser.add_argument("--total-accel", action="store_true", help="report absolute instead of relative acceleration")
    parser.add_argument("--disp-source", choices=["measured", "integrated"],
                        help="displacement measurement: noisy sensor or double-integrated acceleration")


def build_parser() -> CliParser:
    parser = CliParser(
        description="Response-only model-class selection with a 1D CNN",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python shmclassnet.py reproduce --preset fig2
  python shmclassnet.py reproduce --preset sensitivity --seed 7
  python shmclassnet.py simulate --preset boucwen3 --total-accel --out runs/bw
        """,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a labeled dataset")
    add_run_flags(p)
    p.add_argument("--out", "-o", type=str, help="dataset directory")

    p = sub.add_parser("fuse", help="Kalman-filter a dataset")
    p.add_argument("--manifest", "-m", type=str, required=True, help="manifest.json of the raw dataset")
    p.add_argument("--kalman", "-k", type=str, help="Kalman config JSON {Qd_scale, Rd, disp_decimation, x0, P0_scale}")
    p.add_argument("--out", "-o", type=str, help="filtered dataset directory (default: <dataset>_fused)")

    p = sub.add_parser("train", help="train the network on a dataset")
    add_run_flags(p)
    p.add_argument("--manifest", "-m", type=str, required=True, help="manifest.json of the dataset")
    p.add_argument("--network", "-n", type=str, help="network preset (desk-scale, sensitivity, paper-scale)")
    p.add_argument("--paper-scale", action="store_true", help="use the full-size network (slow)")
    p.add_argument("--out", "-o", type=str, help="output directory for weights and train report")

    p = sub.add_parser("classify", help="classify signal files")
    p.add_argument("--weights", "-w", type=str, required=True, help="weights.json")
    p.add_argument("signals", nargs="+", help="signal CSV files (with .meta.json sidecars)")
    p.add_argument("--channel", choices=["disp", "vel", "accel"], help="override the channel stored with the weights")
    p.add_argument("--out", "-o", type=str, default="classification.csv", help="prediction CSV")

    p = sub.add_parser("evaluate", help="score a network on a dataset split")
    p.add_argument("--weights", "-w", type=str, required=True, help="weights.json")
    p.add_argument("--manifest", "-m", type=str, required=True, help="manifest.json of the dataset")
    p.add_argument("--split", choices=["train", "validate", "test"], default="test")
    p.add_argument("--channel", choices=["disp", "vel", "accel"], help="override the channel stored with the weights")
    p.add_argument("--out", "-o", type=str, help="evaluation CSV (default: evaluation_<split>.csv beside the weights)")

    p = sub.add_parser("reproduce", help="run a full study and write a report bundle")
    p.add_argument("--preset", "-p", type=str, required=True,
                   help="study preset (fig2..fig7, fig9..fig11, sensitivity, sensitivity-freefall)")
    p.add_argument("--config", "-c", type=str, help="JSON file overriding experiment fields")
    p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    p.add_argument("--channel", choices=["disp", "vel", "accel"])
    p.add_argument("--total-accel", action="store_true")
    p.add_argument("--disp-source", choices=["measured", "integrated"])
    p.add_argument("--paper-scale", action="store_true", help="use the full-size network (slow)")
    p.add_argument("--out", "-o", type=str, help="bundle directory (default: <out_dir>/<preset>)")

    p = sub.add_parser("gradcheck", help="gradient check on random small networks")
    p.add_argument("--networks", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-4)

    return parser


def make_workflow(args, settings: SettingsManager, config_manager: ConfigManager):
    out_root = Path(settings.out_dir)

    if args.command == "simulate":
        run = resolve_run(args, config_manager)
        return SimulateWorkflow(run, Path(args.out) if args.out else out_root / run.name / "raw", workers=settings.workers)

    if args.command == "fuse":
        manifest = Path(args.manifest)
        kalman = None
        if args.kalman:
            kalman = ConfigManager.load_overrides(args.kalman)
        out = Path(args.out) if args.out else manifest.parent.with_name(manifest.parent.name + "_fused")
        return FuseWorkflow(manifest, out, kalman=kalman)

    if args.command == "train":
        manifest = Path(args.manifest)
        run = resolve_run(args, config_manager, base=load_run(manifest.parent))
        out = Path(args.out) if args.out else manifest.parent.parent / "net"
        return TrainWorkflow(manifest, out, run=run, network=args.network, paper_scale=args.paper_scale,
                             config_manager=config_manager)

    if args.command == "classify":
        return ClassifyWorkflow(Path(args.weights), [Path(s) for s in args.signals], Path(args.out), channel=args.channel)

    if args.command == "evaluate":
        weights = Path(args.weights)
        out = Path(args.out) if args.out else weights.parent / f"evaluation_{args.split}.csv"
        return EvaluateWorkflow(weights, Path(args.manifest), out, split=args.split, channel=args.channel)

    if args.command == "reproduce":
        overrides = deep_merge(ConfigManager.load_overrides(args.config), cli_overrides(args))
        if args.paper_scale:
            logger.warning("=" * 50)
            logger.warning("--paper-scale: kernel 2048 with 128/256 channels, this run takes hours")
            logger.warning("=" * 50)
        return ReproduceWorkflow(args.preset, Path(args.out) if args.out else out_root / args.preset,
                                 overrides=overrides, paper_scale=args.paper_scale, workers=settings.workers,
                                 config_manager=config_manager)

    return GradCheckWorkflow(networks=args.networks, seed=args.seed, tol=args.tol)


def main(argv=None) -> int:
    """Run one command and return its exit code."""
    args = build_parser().parse_args(argv)

    try:
        settings = SettingsManager()
    except ShmClassNetError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    setup_logger(log_file=settings.log_file, level=settings.log_level)

    logger.info("=" * 50)
    logger.info(f"shmclassnet {args.command}")
    logger.info("=" * 50)

    try:
        workflow = make_workflow(args, settings, ConfigManager())
    except ShmClassNetError as e:
        logger.error(f"{args.command}: {e}")
        return 2 if isinstance(e, NumericalError) else 1

    run_dir = workflow.output_dir()
    with run_log(run_dir, args.command) if run_dir is not None else nullcontext():
        success = workflow.run()
    if success:
        logger.success(f"shmclassnet {args.command} finished")
    else:
        logger.warning(f"shmclassnet {args.command} failed (exit code {workflow.exit_code})")
    return workflow.exit_code


if __name__ == "__main__":
    sys.exit(main())
