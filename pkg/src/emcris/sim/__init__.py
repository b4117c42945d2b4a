"""Scenario construction, baseline schemes, sweeps and the command line."""

from .config import SCHEMES, SWEEPS, ScenarioConfig, dump_config, load_config, parse_config
from .scenario import Scenario
from .schemes import RunRecord, run_scheme
from .sweep import CSV_COLUMNS, run_sweep

__all__ = [
    "SCHEMES", "SWEEPS", "ScenarioConfig", "dump_config", "load_config", "parse_config", "Scenario",
    "RunRecord", "run_scheme", "CSV_COLUMNS", "run_sweep",
]
