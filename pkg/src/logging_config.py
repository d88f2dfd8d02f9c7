"""
Logging configuration for fencewire.

Provides a centralized logging setup with console output and optional file rotation.
"""

import logging
import os
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Optional

from core.constants import LOG_LEVEL_ENV

_LEVELS = {
    "DEBUG": logging.DEBUG,
    "INFO": logging.INFO,
    "WARNING": logging.WARNING,
    "ERROR": logging.ERROR,
}


def resolve_level(debug: bool = False) -> int:
    """
    Resolve the log level from the debug flag and the FENCEWIRE_LOG environment variable.

    Args:
        debug: If True, force DEBUG regardless of the environment

    Returns:
        A logging level constant
    """
    if debug:
        return logging.DEBUG
    requested = os.environ.get(LOG_LEVEL_ENV, "").strip().upper()
    if not requested:
        return logging.INFO
    if requested not in _LEVELS:
        logging.getLogger('fencewire').warning(
            f"Ignoring unknown {LOG_LEVEL_ENV} value '{requested}', using INFO")
        return logging.INFO
    return _LEVELS[requested]


def setup_logging(debug: bool = False, log_dir: Optional[str] = None) -> logging.Logger:
    """
    Configure application logging with a console handler and, when log_dir is given, a file handler.

    Args:
        debug: If True, set logging level to DEBUG, otherwise use FENCEWIRE_LOG (default INFO)
        log_dir: Directory for log files. If None, no log file is written

    Returns:
        Configured logger instance for the application

    Example:
        >>> logger = setup_logging(debug=True)
        >>> logger.info("Application started")
    """
    level = resolve_level(debug)

    logger = logging.getLogger('fencewire')
    logger.setLevel(level)

    # Remove existing handlers to avoid duplicates
    logger.handlers.clear()

    if log_dir is not None:
        log_dir_path = Path(log_dir)
        log_dir_path.mkdir(exist_ok=True, parents=True)

        # File handler with rotation (10MB per file, keep 5 backups)
        file_handler = RotatingFileHandler(
            log_dir_path / 'fencewire.log',
            maxBytes=10 * 1024 * 1024,  # 10MB
            backupCount=5,
            encoding='utf-8'
        )
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(logging.Formatter(
            '%(asctime)s - %(name)s - %(levelname)s - %(funcName)s:%(lineno)d - %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        ))
        logger.addHandler(file_handler)

    console_handler = logging.StreamHandler()
    console_handler.setLevel(level)
    console_handler.setFormatter(logging.Formatter('%(levelname)s: %(message)s'))
    logger.addHandler(console_handler)

    return logger


def get_logger(name: str) -> logging.Logger:
    """
    Get a logger instance for a specific module.

    Args:
        name: Name of the module (usually __name__)

    Returns:
        Logger instance

    Example:
        >>> logger = get_logger(__name__)
        >>> logger.info("Module loaded")
    """
    return logging.getLogger(f'fencewire.{name}')
