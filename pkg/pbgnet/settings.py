"""
Settings Module

This module loads runtime settings from the environment (and a .env file when
present). Command-line flags take precedence over these values.
"""

import os
from dataclasses import dataclass

from dotenv import load_dotenv

from .errors import ConfigError

# Load environment variables from .env file
load_dotenv()

DEFAULT_RUN_DB_URL = "sqlite:///pbgnet_runs.db"
DEFAULT_EXACT_CAP = 20


@dataclass(frozen=True)
class Settings:
    """Runtime settings shared by the CLI and the tools."""
    run_db_url: str
    data_dir: str
    out_dir: str
    exact_cap: int
    log_level: str


def load_settings() -> Settings:
    """
    Read settings from environment variables.

    Returns:
        Settings instance with defaults filled in
    """
    try:
        exact_cap = int(os.environ.get("PBGNET_EXACT_CAP", DEFAULT_EXACT_CAP))
    except ValueError:
        raise ConfigError(f"PBGNET_EXACT_CAP must be an integer, got {os.environ['PBGNET_EXACT_CAP']}")
    if exact_cap < 1:
        raise ConfigError(f"PBGNET_EXACT_CAP must be positive, got {exact_cap}")
    return Settings(
        run_db_url=os.environ.get("PBGNET_RUN_DB_URL", DEFAULT_RUN_DB_URL),
        data_dir=os.environ.get("PBGNET_DATA_DIR", "data"),
        out_dir=os.environ.get("PBGNET_OUT_DIR", "runs"),
        exact_cap=exact_cap,
        log_level=os.environ.get("PBGNET_LOG_LEVEL", "INFO").upper(),
    )
