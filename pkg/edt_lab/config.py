"""Configuration loader.

Settings come from environment variables. A top-level `.env` file (project root)
is loaded first if present, without overriding variables that are already exported.

Experiment config files use the same flat KEY=VALUE format and are parsed with
`dotenv_values`, so one syntax covers both.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional

import logzero
from dotenv import dotenv_values, load_dotenv

from edt_lab.errors import ConfigError

PROJECT_ROOT = Path(__file__).resolve().parents[1]

_LOG_FORMAT = "%(color)s[%(levelname)1.1s %(asctime)s %(module)s:%(lineno)d]%(end_color)s %(message)s"


def load_dotenv_if_present(dotenv_path: Optional[str] = None) -> bool:
    """Load `.env` into os.environ (existing variables win). Returns True if a file was read."""
    path = Path(dotenv_path) if dotenv_path else PROJECT_ROOT / ".env"
    if not path.exists():
        return False
    return load_dotenv(path, override=False)


@dataclass(frozen=True)
class Settings:
    threads: int
    log_level: str
    logfile: Optional[str]


def get_settings() -> Settings:
    raw_threads = os.environ.get("EDT_LAB_THREADS", "").strip()
    if raw_threads:
        try:
            threads = int(raw_threads)
        except ValueError as e:
            raise ConfigError(f"EDT_LAB_THREADS must be an integer, got {raw_threads!r}") from e
        if threads < 1:
            raise ConfigError("EDT_LAB_THREADS must be >= 1")
    else:
        threads = os.cpu_count() or 1

    return Settings(
        threads=threads,
        log_level=os.environ.get("EDT_LAB_LOG_LEVEL", "INFO").upper(),
        logfile=os.environ.get("EDT_LAB_LOGFILE") or None,
    )


def get_logger(name: str) -> logging.Logger:
    """Module logger backed by logzero; level and logfile follow the environment."""
    level_name = os.environ.get("EDT_LAB_LOG_LEVEL", "INFO").upper()
    level = getattr(logging, level_name, logging.INFO)
    logfile = os.environ.get("EDT_LAB_LOGFILE") or None
    return logzero.setup_logger(
        name=name,
        level=level,
        logfile=logfile,
        maxBytes=5_000_000 if logfile else 0,
        backupCount=2 if logfile else 0,
        formatter=logzero.LogFormatter(fmt=_LOG_FORMAT),
    )


def set_log_level(level_name: str) -> None:
    """Re-level every toolkit logger already created (used by --verbose/--quiet)."""
    level = getattr(logging, level_name.upper(), None)
    if not isinstance(level, int):
        raise ConfigError(f"Unknown log level {level_name!r}")
    os.environ["EDT_LAB_LOG_LEVEL"] = level_name.upper()
    for name in list(logging.Logger.manager.loggerDict):
        if name.startswith("edt_lab"):
            logging.getLogger(name).setLevel(level)


def read_config_file(path: str) -> Dict[str, str]:
    """Parse a flat key=value experiment file. Keys are lower-cased, dashes become underscores."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"Config file not found: {path}")
    try:
        values = dotenv_values(p)
    except Exception as e:
        raise ConfigError(f"Could not parse config file {path}: {e}") from e

    out: Dict[str, str] = {}
    for key, value in values.items():
        if value is None:
            raise ConfigError(f"Config key {key!r} in {path} has no value")
        out[key.strip().lower().replace("-", "_")] = value.strip()
    return out
