"""
Logging for shmclassnet: one console sink, one rotating application log,
and an optional plain log inside each run's output directory.
"""

import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Optional, Union

from loguru import logger

CONSOLE_FORMAT = (
    "<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | "
    "<cyan>{extra[signal]}</cyan>{message}"
)
FILE_FORMAT = "{time:YYYY-MM-DD HH:mm:ss.SSS} | {level: <8} | {name}:{function}:{line} | {extra[signal]}{message}"
RUN_FORMAT = "{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {extra[signal]}{message}"


def setup_logger(
    log_file: str = "logs/shmclassnet.log",
    level: str = "DEBUG",
    rotation: str = "50 MB",
    retention: str = "14 days",
    compression: str = "zip",
    console_level: str = "INFO",
) -> None:
    """
    Configure the console and application-log handlers.

    Args:
        log_file: Path to the rotating application log
        level: Minimum level for the application log
        rotation: When to rotate the log file (e.g., "50 MB", "1 day")
        retention: How long to keep rotated files
        compression: Compression format for rotated files
        console_level: Minimum level for stderr
    """
    logger.remove()
    logger.configure(extra={"signal": ""})

    logger.add(sys.stderr, format=CONSOLE_FORMAT, level=console_level)

    Path(log_file).parent.mkdir(parents=True, exist_ok=True)
    logger.add(
        log_file,
        format=FILE_FORMAT,
        level=level,
        rotation=rotation,
        retention=retention,
        compression=compression,
        encoding="utf-8",
    )


@contextmanager
def run_log(directory: Union[str, Path], command: str, level: str = "DEBUG") -> Iterator[Path]:
    """
    Mirror everything logged inside the block to <directory>/<command>.log.

    The file is overwritten per invocation so a run directory holds the log
    of the command that produced it.
    """
    path = Path(directory) / f"{command}.log"
    path.parent.mkdir(parents=True, exist_ok=True)
    handler_id = logger.add(path, format=RUN_FORMAT, level=level, mode="w", encoding="utf-8")
    try:
        yield path
    finally:
        logger.remove(handler_id)


def get_logger(signal: Optional[str] = None):
    """Logger whose lines are prefixed with a signal id."""
    if signal:
        return logger.bind(signal=f"[{signal}] ")
    return logger
