"""Experiment orchestration: configs, grid search, reports and model bundles."""

from .config import ConfigError, ExperimentConfig, load_config
from .families import FAMILIES, FittedModel, fit_family, paper_bundle
from .pipeline import ExperimentResult, GridResult, grid_search, run_experiment
from .report import LeaderboardRow, emit_report, parse_leaderboard

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ExperimentResult",
    "FAMILIES",
    "FittedModel",
    "GridResult",
    "LeaderboardRow",
    "emit_report",
    "fit_family",
    "grid_search",
    "load_config",
    "paper_bundle",
    "parse_leaderboard",
    "run_experiment",
]
