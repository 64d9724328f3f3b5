"""Logging configuration utilities."""

import logging
import logging.config
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path

from config.settings import Settings
from config.settings import settings as default_settings

JSON_MESSAGE_FORMAT = (
    '{"timestamp": "%(asctime)s", "logger": "%(name)s", "level": '
    '"%(levelname)s", "message": "%(message)s"}'
)

# Top-level packages of this project; modules log under get_logger(__name__).
PROJECT_LOGGERS = ("app", "cli", "config", "core", "infrastructure", "utils")

# PIL logs every PNG chunk at DEBUG.
QUIET_LOGGERS = ("PIL", "torch")


def _formatter_name(active_settings: Settings) -> str:
    return "json" if active_settings.LOG_JSON_FORMAT else "standard"


def build_log_config(active_settings: Settings) -> dict:
    """Build a dictConfig-compatible logging configuration.

    Logs go to stderr; stdout carries command output (CSV, JSON, tables).
    """
    level = "DEBUG" if active_settings.DEBUG_MODE else active_settings.LOG_LEVEL
    project = {"handlers": ["console"], "level": level, "propagate": False}
    return {
        "version": 1,
        "disable_existing_loggers": False,
        "formatters": {
            "standard": {"format": active_settings.LOG_FORMAT},
            "json": {
                "format": JSON_MESSAGE_FORMAT,
                "datefmt": "%Y-%m-%dT%H:%M:%S",
            },
        },
        "handlers": {
            "console": {
                "class": "logging.StreamHandler",
                "level": level,
                "formatter": _formatter_name(active_settings),
                "stream": "ext://sys.stderr",
            }
        },
        "loggers": {
            "": {"handlers": ["console"], "level": level, "propagate": False},
            **{name: dict(project) for name in PROJECT_LOGGERS},
            **{name: {"level": "WARNING"} for name in QUIET_LOGGERS},
        },
    }


def setup_logging(active_settings: Settings | None = None) -> None:
    """Setup application logging based on configuration."""
    cfg_settings = active_settings or default_settings
    logging.config.dictConfig(build_log_config(cfg_settings))

    logger = logging.getLogger(__name__)
    logger.debug(f"Log level: {cfg_settings.LOG_LEVEL}, JSON format: {cfg_settings.LOG_JSON_FORMAT}")


@contextmanager
def run_log(path: Path, active_settings: Settings | None = None) -> Iterator[Path]:
    """Mirror project log records into ``path`` while the block runs.

    The file keeps INFO and above regardless of the console level, so a run
    directory always records its progress lines and any abort.
    """
    cfg_settings = active_settings or default_settings
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    handler = logging.FileHandler(path, mode="a", encoding="utf-8")
    handler.setLevel(logging.INFO)
    if cfg_settings.LOG_JSON_FORMAT:
        handler.setFormatter(logging.Formatter(JSON_MESSAGE_FORMAT, datefmt="%Y-%m-%dT%H:%M:%S"))
    else:
        handler.setFormatter(logging.Formatter(cfg_settings.LOG_FORMAT))

    loggers = [logging.getLogger(name) for name in PROJECT_LOGGERS]
    saved_levels = [logger.level for logger in loggers]
    for logger in loggers:
        logger.addHandler(handler)
        if logger.getEffectiveLevel() > logging.INFO:
            logger.setLevel(logging.INFO)
    try:
        yield path
    finally:
        for logger, level in zip(loggers, saved_levels, strict=True):
            logger.removeHandler(handler)
            logger.setLevel(level)
        handler.close()


def get_logger(name: str) -> logging.Logger:
    return logging.getLogger(name)
