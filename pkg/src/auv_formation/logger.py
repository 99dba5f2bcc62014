#!/usr/bin/env python3
"""
Logging for the formation simulator.

Console output goes to stderr so stdout stays reserved for machine-read
result lines. A rotating log file is added when ``AUVSIM_LOG_FILE`` is set.
"""

import logging
import os
import sys
import traceback
from logging.handlers import RotatingFileHandler
from typing import Any

from .config import Config

LOGGER_NAME = "auv_formation"
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


class Logger:
    """Logger wrapper with rotation support."""

    def __init__(self, config: Config):
        self.config = config
        self.log_file = config.log_file
        self.logger = self._setup_logger()

    def _setup_logger(self) -> logging.Logger:
        """Set up the logger with file rotation and stderr output."""
        logger = logging.getLogger(LOGGER_NAME)
        logger.setLevel(self.config.log_level_value)
        logger.handlers.clear()
        logger.propagate = False

        formatter = logging.Formatter(LOG_FORMAT)

        if self.config.log_file:
            try:
                log_dir = os.path.dirname(self.config.log_file)
                if log_dir:
                    os.makedirs(log_dir, exist_ok=True)
                file_handler = RotatingFileHandler(
                    self.config.log_file,
                    maxBytes=10 * 1024 * 1024,  # 10MB
                    backupCount=self.config.log_rotation_count,
                )
                file_handler.setFormatter(formatter)
                logger.addHandler(file_handler)
            except OSError:
                # Fall back to console logging only
                pass

        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setFormatter(formatter)
        logger.addHandler(console_handler)

        return logger

    def info(self, message: str, **kwargs: Any) -> None:
        self.logger.info(message, extra=kwargs)

    def error(self, message: str, **kwargs: Any) -> None:
        self.logger.error(message, extra=kwargs)

    def warning(self, message: str, **kwargs: Any) -> None:
        self.logger.warning(message, extra=kwargs)

    def debug(self, message: str, **kwargs: Any) -> None:
        self.logger.debug(message, extra=kwargs)

    def critical(self, message: str, **kwargs: Any) -> None:
        self.logger.critical(message, extra=kwargs)

    def exception(self, message: str, exc_info: Any = None, **kwargs: Any) -> None:
        """Log an error with its traceback.

        Args:
            message: Message to log
            exc_info: Exception info (if None, uses the exception being handled)
            **kwargs: Additional logging context
        """
        if exc_info is None:
            exc_info = sys.exc_info()
        details = "".join(traceback.format_exception(*exc_info)) if exc_info[0] else ""
        self.logger.error(f"{message}\n{details}".rstrip(), extra=kwargs)


class LoggingContext:
    """Prefixes every message with a component tag such as ``[ENGINE]``."""

    def __init__(self, logger: Logger, context: str):
        self.logger = logger
        self.context = context

    def info(self, message: str) -> None:
        self.logger.info(f"[{self.context}] {message}")

    def error(self, message: str) -> None:
        self.logger.error(f"[{self.context}] {message}")

    def warning(self, message: str) -> None:
        self.logger.warning(f"[{self.context}] {message}")

    def debug(self, message: str) -> None:
        self.logger.debug(f"[{self.context}] {message}")

    def critical(self, message: str) -> None:
        self.logger.critical(f"[{self.context}] {message}")

    def exception(self, message: str, exc_info: Any = None) -> None:
        self.logger.exception(f"[{self.context}] {message}", exc_info=exc_info)


# Global logger instance (will be initialized with config)
logger: Logger | None = None


def get_logger(config: Config) -> Logger:
    """Get or create the global logger instance."""
    global logger
    if logger is None:
        logger = Logger(config)
    return logger
