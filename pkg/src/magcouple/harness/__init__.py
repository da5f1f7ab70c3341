"""Config-driven experiment scenarios, closed-loop simulation and CSV logs."""

from .config import ConfigError, TrialConfig, from_mapping, load_config
from .logs import COLUMNS, LogFormatError, LogRecord, read_log, write_log
from .scenarios import ScenarioResult, run_scenario

__all__ = ["ConfigError", "TrialConfig", "from_mapping", "load_config", "COLUMNS",
           "LogFormatError", "LogRecord", "read_log", "write_log", "ScenarioResult", "run_scenario"]
