"""
Error types raised across the pipeline.

The CLI maps NumericalError to exit code 2 and every other
ShmClassNetError to exit code 1.
"""
from typing import Optional


class ShmClassNetError(Exception):
    """Base class for all pipeline errors."""


class SignalError(ShmClassNetError, ValueError):
    """Invalid time-series contents (empty, nonfinite, wrong channel count)."""


class SignalParseError(SignalError):
    """Malformed signal CSV or metadata sidecar."""

    def __init__(self, message: str, path: str = "", line: Optional[int] = None, field: Optional[str] = None):
        self.path = str(path)
        self.line = line
        self.field = field
        where = []
        if self.path:
            where.append(self.path)
        if line is not None:
            where.append(f"line {line}")
        if field:
            where.append(f"field '{field}'")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class ManifestError(ShmClassNetError):
    """Dataset manifest problems, including entries pointing at missing files."""


class ShapeError(ShmClassNetError, ValueError):
    """Tensor, parameter or configuration shapes do not chain."""


class NumericalError(ShmClassNetError, ArithmeticError):
    """A numerical procedure failed at a known step."""

    def __init__(self, message: str, step: Optional[int] = None, signal: Optional[str] = None):
        self.step = step
        self.signal = signal
        self.reason = message
        super().__init__(self._format())

    def _format(self) -> str:
        parts = [self.reason]
        if self.step is not None:
            parts.append(f"step {self.step}")
        if self.signal:
            parts.append(f"signal {self.signal}")
        return " | ".join(parts)

    def with_signal(self, signal: str) -> "NumericalError":
        """Return a copy tagged with the signal identity."""
        return NumericalError(self.reason, step=self.step, signal=signal)


class DefinitionError(ShmClassNetError, ValueError):
    """Invalid kernel or system definition, or misuse of one."""
