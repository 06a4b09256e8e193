"""Configuration, metrics and the command-line front end."""

from .config import (
    ConfigError,
    DataSection,
    ExecuteSection,
    RunConfig,
    config_from_dict,
    config_hash,
    config_to_dict,
    desk_run_config,
    dumps_config,
    load_config,
    save_config,
)
from .metrics import MetricsReport, build_metrics, rescore_trace_success

__all__ = [
    "ConfigError",
    "DataSection",
    "ExecuteSection",
    "RunConfig",
    "config_from_dict",
    "config_to_dict",
    "config_hash",
    "desk_run_config",
    "dumps_config",
    "load_config",
    "save_config",
    "MetricsReport",
    "build_metrics",
    "rescore_trace_success",
]
