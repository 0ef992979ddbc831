"""
Common run/exit-code handling for pipeline workflows.
"""
import json
from pathlib import Path
from typing import Optional

from loguru import logger

from src.models.run import RunConfig
from src.utils.errors import DefinitionError, NumericalError, ShmClassNetError

RUN_FILE = "run.json"


class PipelineWorkflow:
    """
    Base for the command workflows.

    Subclasses implement `_execute`; `run` logs the banners, turns pipeline
    errors into a False result and remembers the error for the exit code.
    """

    title = "workflow"

    def __init__(self):
        self.error: Optional[Exception] = None

    def run(self) -> bool:
        """
        Returns:
            True if the workflow completed successfully
        """
        self.error = None
        logger.info("=" * 50)
        logger.info(f"{self.title}: start")
        logger.info("=" * 50)
        try:
            self._execute()
        except (ShmClassNetError, OSError) as e:
            self.error = e
            logger.error(f"{self.title} failed: {e}")
            return False
        logger.success(f"{self.title}: done")
        return True

    def _execute(self) -> None:
        raise NotImplementedError

    def output_dir(self) -> Optional[Path]:
        """Directory the workflow writes into, if any."""
        out_dir = getattr(self, "out_dir", None)
        return Path(out_dir) if out_dir is not None else None

    @property
    def exit_code(self) -> int:
        """0 success, 2 numerical failure, 1 anything else."""
        if self.error is None:
            return 0
        return 2 if isinstance(self.error, NumericalError) else 1


def save_run(run: RunConfig, directory: Path) -> Path:
    """Store the run configuration beside a dataset so later stages can pick it up."""
    path = Path(directory) / RUN_FILE
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(run.to_dict(), f, indent=2)
        f.write("\n")
    return path


def load_run(directory: Path) -> Optional[RunConfig]:
    path = Path(directory) / RUN_FILE
    if not path.is_file():
        return None
    try:
        with open(path, "r", encoding="utf-8") as f:
            return RunConfig.from_dict(json.load(f))
    except json.JSONDecodeError as e:
        raise DefinitionError(f"malformed {path}: {e.msg} at line {e.lineno}") from e
