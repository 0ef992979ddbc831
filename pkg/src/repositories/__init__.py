from .signal_repository import SignalRepository
from .weights_repository import WeightsRepository
from .report_repository import ReportRepository
from .system_repository import SystemRepository

__all__ = [
    "SignalRepository",
    "WeightsRepository",
    "ReportRepository",
    "SystemRepository",
]
