"""
Runtime Settings - attrep
=========================

Single place where the environment is read. Every other module imports the
``settings`` singleton instead of calling ``os.getenv`` itself, the same way
the services share one gateway object.

Keys (all optional, see ``.env.example``):
    ATTREP_OUTPUT_DIR      default output directory for CLI runs
    ATTREP_SEED            default seed when neither flag nor config gives one
    ATTREP_PARALLEL_PAIRS  "true" enables the thread-chunked pair sums
    ATTREP_PAIR_WORKERS    thread count for the chunked pair sums
    ATTREP_LOG_LEVEL       root log level (DEBUG, INFO, ...)
    ATTREP_LOG_FILE        when set, logs are also written to this file
    ATTREP_PORT            port of the HTTP front end
"""

import logging
import os
import sys
from dataclasses import dataclass, asdict
from typing import Any, Dict, Optional

from dotenv import load_dotenv

# Load environment variables once at module initialization
load_dotenv()


def _env_bool(name: str, default: bool) -> bool:
    raw = os.getenv(name)
    if raw is None:
        return default
    return raw.strip().lower() in {"1", "true", "yes", "on"}


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or not raw.strip():
        return default
    try:
        return int(raw)
    except ValueError:
        print(f"⚠️  WARNING: {name}={raw!r} is not an integer, using {default}")
        return default


@dataclass(frozen=True)
class Settings:
    output_dir: str = "results"
    seed: int = 0
    parallel_pairs: bool = False
    pair_workers: int = 4
    log_level: str = "INFO"
    log_file: Optional[str] = None
    port: int = 5001

    @classmethod
    def from_env(cls) -> "Settings":
        return cls(
            output_dir=os.getenv("ATTREP_OUTPUT_DIR", "results"),
            seed=_env_int("ATTREP_SEED", 0),
            parallel_pairs=_env_bool("ATTREP_PARALLEL_PAIRS", False),
            pair_workers=max(1, _env_int("ATTREP_PAIR_WORKERS", 4)),
            log_level=os.getenv("ATTREP_LOG_LEVEL", "INFO").upper(),
            log_file=os.getenv("ATTREP_LOG_FILE") or None,
            port=_env_int("ATTREP_PORT", 5001),
        )

    def as_dict(self) -> Dict[str, Any]:
        return asdict(self)


class ConsoleHandler(logging.StreamHandler):
    """Stream handler bound to whatever ``sys.stderr`` is when a record is emitted."""

    def emit(self, record: logging.LogRecord) -> None:
        self.stream = sys.stderr
        super().emit(record)


def get_logger(level: Optional[str] = None) -> logging.Logger:
    """
    Configure the root logger once with a console handler and, if ATTREP_LOG_FILE
    is set, a file handler. Later calls only change the level.
    """
    logger = logging.getLogger()
    if not any(isinstance(handler, ConsoleHandler) for handler in logger.handlers):
        logger.handlers = []
        formatter = logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s")
        stderr_log_handler = ConsoleHandler()
        stderr_log_handler.setFormatter(formatter)
        logger.addHandler(stderr_log_handler)
        if settings.log_file:
            file_log_handler = logging.FileHandler(settings.log_file)
            file_log_handler.setFormatter(formatter)
            logger.addHandler(file_log_handler)
    logger.setLevel(level or settings.log_level)
    return logger


# Global singleton instance
settings = Settings.from_env()
