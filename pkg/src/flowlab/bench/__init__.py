"""Benchmark harness: configuration, drivers, reports, and the CLI."""

from .benchmarks import (
    dimensionless_numbers,
    make_tank_wall,
    run_benchmark,
    run_method_verification,
    run_rising_bubble,
    run_sloshing_tank,
    run_static_drop,
)
from .config import BenchmarkConfig, ConfigError, defaults_for, echo_config, \
    load_config, parse_config_text
from .reports import Check, Report, format_csv, write_csv, write_report

__all__ = [
    "BenchmarkConfig", "Check", "ConfigError", "Report",
    "defaults_for", "dimensionless_numbers", "echo_config", "format_csv",
    "load_config", "make_tank_wall", "parse_config_text", "run_benchmark",
    "run_method_verification", "run_rising_bubble", "run_sloshing_tank",
    "run_static_drop", "write_csv", "write_report",
]
