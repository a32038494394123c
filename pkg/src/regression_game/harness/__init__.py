"""Experiment harness: config ingestion, seeded runs, report and figure emission."""

from .config import ExperimentConfig, config_from_dict, load_config
from .runner import run
from .reports import emit

__all__ = ["ExperimentConfig", "config_from_dict", "load_config", "run", "emit"]
