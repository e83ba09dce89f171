"""Configuration package for the edit lab."""

from .log_setup import configure_logging
from .settings import (
    SEED_STREAMS,
    AppSettings,
    EvalConfig,
    ModelConfig,
    RunConfig,
    config_hash,
    derive_seed,
    load_run_config,
    load_settings,
    parse_run_config,
)

__all__ = [
    'SEED_STREAMS',
    'AppSettings',
    'EvalConfig',
    'ModelConfig',
    'RunConfig',
    'config_hash',
    'configure_logging',
    'derive_seed',
    'load_run_config',
    'load_settings',
    'parse_run_config',
]
