"""
Logging configuration for the inbetweening toolkit

One package-level logger (``inbetween``) owns the handlers. Components log
through child loggers from :func:`get_logger`, so the single
``setup_logger`` call made by the CLI controls a whole run.
"""

import logging
import sys
from logging.handlers import RotatingFileHandler
from typing import List, Optional, Tuple


ROOT_LOGGER_NAME = "inbetween"
DEFAULT_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
DEBUG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(filename)s:%(lineno)d - %(message)s"
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


def parse_level(level: str) -> int:
    name = level.upper()
    if name not in LOG_LEVELS:
        raise ValueError(f"Unknown log level {level!r}; expected one of {', '.join(LOG_LEVELS)}")
    return getattr(logging, name)


def _build_handlers(log_file: Optional[str], max_bytes: int,
                    backups: int) -> Tuple[List[logging.Handler], Optional[OSError]]:
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if not log_file:
        return handlers, None
    try:
        handlers.append(RotatingFileHandler(log_file, maxBytes=max_bytes, backupCount=backups))
    except OSError as e:
        return handlers, e
    return handlers, None


def setup_logger(
    name: str = ROOT_LOGGER_NAME,
    level: str = "INFO",
    format_string: Optional[str] = None,
    log_file: Optional[str] = None,
    log_max_size: int = 10 * 1024 * 1024,  # 10MB
    log_backup_count: int = 5,
    debug: bool = False,
) -> logging.Logger:
    """
    Configure a logger, replacing any handlers it already has.

    Args:
        name: Logger name (the package logger by default)
        level: DEBUG, INFO, WARNING, ERROR or CRITICAL
        format_string: Message format; ``debug`` selects one with source locations
        log_file: Optional log file, rotated by size
        log_max_size: Bytes before the log file rotates
        log_backup_count: Rotated files to keep
        debug: Include file and line of each record

    Returns:
        The configured logger
    """
    numeric_level = parse_level(level)
    if format_string is None:
        format_string = DEBUG_FORMAT if debug else DEFAULT_FORMAT
    formatter = logging.Formatter(format_string)

    logger = logging.getLogger(name)
    logger.setLevel(numeric_level)
    for handler in logger.handlers[:]:
        logger.removeHandler(handler)
        handler.close()

    handlers, file_error = _build_handlers(log_file, log_max_size, log_backup_count)
    for handler in handlers:
        handler.setLevel(numeric_level)
        handler.setFormatter(formatter)
        logger.addHandler(handler)

    # a bad log path degrades to console logging
    if file_error is not None:
        logger.error(f"Failed to setup file logging to {log_file}: {file_error}")
    return logger


def get_logger(component: str = "") -> logging.Logger:
    """
    Logger named ``inbetween.<component>``.

    The package logger gets default handlers on first use, so library code
    can log without the CLI having called ``setup_logger``.
    """
    root = logging.getLogger(ROOT_LOGGER_NAME)
    if not root.handlers:
        setup_logger(ROOT_LOGGER_NAME)
    if not component:
        return root
    return logging.getLogger(f"{ROOT_LOGGER_NAME}.{component}")
