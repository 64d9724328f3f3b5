"""Application configuration settings (immutable)."""

import os
from dataclasses import dataclass
from typing import Any

from core.domain.constants import DEFAULT_LOG_FORMAT, DEFAULT_LOG_LEVEL


@dataclass(frozen=True)
class Settings:
    """Immutable process settings loaded from environment.

    Experiment hyperparameters live in the run config, not here.
    """

    # Logging Configuration
    LOG_LEVEL: str
    LOG_FORMAT: str
    LOG_JSON_FORMAT: bool

    # Execution Configuration
    DATA_MAX_WORKERS: int | None
    TORCH_NUM_THREADS: int | None
    SINGLE_THREAD: bool

    # Development Configuration
    DEBUG_MODE: bool

    @classmethod
    def from_env(cls, overrides: dict[str, Any] | None = None) -> "Settings":
        """Create Settings from environment variables with optional overrides."""
        overrides = overrides or {}

        def get_bool(name: str, default: bool) -> bool:
            value = str(overrides.get(name, os.getenv(name, str(default)))).lower()
            return value in {"1", "true", "yes", "on"}

        def get_str(name: str, default: str) -> str:
            return str(overrides.get(name, os.getenv(name, default)))

        def get_optional_int(name: str) -> int | None:
            value = overrides.get(name, os.getenv(name))
            return int(value) if value else None

        return cls(
            LOG_LEVEL=get_str("LOG_LEVEL", DEFAULT_LOG_LEVEL),
            LOG_FORMAT=get_str("LOG_FORMAT", DEFAULT_LOG_FORMAT),
            LOG_JSON_FORMAT=get_bool("LOG_JSON_FORMAT", False),
            DATA_MAX_WORKERS=get_optional_int("DATA_MAX_WORKERS"),
            TORCH_NUM_THREADS=get_optional_int("TORCH_NUM_THREADS"),
            SINGLE_THREAD=get_bool("SINGLE_THREAD", False),
            DEBUG_MODE=get_bool("DEBUG", False),
        )


# Global default settings instance (can be shadowed at runtime with overrides)
settings = Settings.from_env()
