"""Benchmark harness: dimension sweeps, subproblem timing races, plot data."""

from .config import BenchConfig, ConfigError, load_config, validate_config
from .runner import ResultRow, emit_plot_data, run_dimension_sweep, run_timing_race

__all__ = [
    "BenchConfig",
    "ConfigError",
    "load_config",
    "validate_config",
    "ResultRow",
    "run_dimension_sweep",
    "run_timing_race",
    "emit_plot_data",
]
