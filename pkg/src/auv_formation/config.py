#!/usr/bin/env python3
"""
Runtime settings for the formation simulator.

Only operational knobs live here (logging, progress reporting, metrics
export). Every modelling constant comes from a scenario file.
"""

import logging
import os
from pathlib import Path

from dotenv import load_dotenv

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


class Config:
    """Process configuration read from the environment and an optional ``.env``."""

    def __init__(self) -> None:
        load_dotenv()

        self.project_root = Path(__file__).parent.parent.parent.absolute()

        # Logging
        self.log_file: str | None = self._resolve_path(os.getenv("AUVSIM_LOG_FILE"))
        self.log_level: str = os.getenv("AUVSIM_LOG_LEVEL", "INFO").upper()
        self.log_rotation_count: int = self._safe_int(os.getenv("AUVSIM_LOG_ROTATION"), 7)

        # Engine progress reporting, percent of simulated time between lines
        self.progress_interval: int = self._safe_int(
            os.getenv("AUVSIM_PROGRESS_INTERVAL"), 10
        )

        self.metrics_enabled: bool = self._get_bool("AUVSIM_METRICS", False)

    def _get_bool(self, env_var: str, default: bool = False) -> bool:
        """Convert environment variable to boolean.

        Args:
            env_var: Environment variable name
            default: Default value if not set

        Returns:
            Boolean value of environment variable
        """
        value = os.getenv(env_var, str(default)).lower()
        return value in ("true", "1", "yes", "on", "t")

    def _resolve_path(self, path: str | None) -> str | None:
        """Resolve relative paths against the project root."""
        if not path:
            return None
        if os.path.isabs(path):
            return path
        return str((self.project_root / path).absolute())

    def _safe_int(self, value: str | None, default: int, min_value: int = 1) -> int:
        """Integer from a string, or ``default`` if it is missing, malformed or too small."""
        if not value:
            return default
        try:
            int_value = int(value)
        except ValueError:
            return default
        if int_value < min_value:
            return default
        return int_value

    def validate(self) -> bool:
        """Validate the runtime settings.

        Returns:
            True if the configuration is usable

        Raises:
            ValueError: If a setting is out of range
        """
        if self.log_level not in LOG_LEVELS:
            raise ValueError(
                f"AUVSIM_LOG_LEVEL must be one of {', '.join(LOG_LEVELS)}, got {self.log_level!r}"
            )
        if not 1 <= self.progress_interval <= 100:
            raise ValueError(
                f"AUVSIM_PROGRESS_INTERVAL must lie in 1..100, got {self.progress_interval}"
            )
        return True

    @property
    def log_level_value(self) -> int:
        return getattr(logging, self.log_level, logging.INFO)


# Global configuration instance
config = Config()
