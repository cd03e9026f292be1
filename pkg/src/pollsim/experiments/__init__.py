"""Experiment harness: configuration, batch runner, metrics and output."""

from .config import ConfigError, ScenarioConfig, load_config
from .metrics import Metrics, MetricsLog, RunSummary
from .runner import (
    ScenarioResult,
    aggregate,
    run_scenario,
    run_single,
    stealth_campaign,
    sweep,
)

__all__ = [
    "ConfigError", "ScenarioConfig", "load_config", "Metrics", "MetricsLog",
    "RunSummary", "ScenarioResult", "aggregate", "run_scenario",
    "run_single", "stealth_campaign", "sweep",
]
