from .config import ConfigManager, SettingsManager

__all__ = ["ConfigManager", "SettingsManager"]
