"""Command-line orchestration."""

from diacnn.cli.config import ConfigError, RunConfig, load_config, parse_config
from diacnn.cli.main import EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, build_parser, main

__all__ = [
    "EXIT_NUMERIC",
    "EXIT_OK",
    "EXIT_USAGE",
    "ConfigError",
    "RunConfig",
    "build_parser",
    "load_config",
    "main",
    "parse_config",
]
