"""Logging configuration for bksim."""

import logging
import os
import sys
from typing import Optional

ROOT_LOGGER = "bksim"


def setup_logger(
    name: str = ROOT_LOGGER,
    level: Optional[str] = None,
    log_file: Optional[str] = None,
) -> logging.Logger:
    """
    Set up and configure a logger with a console handler and an optional file handler.

    Console output goes to stderr; stdout is reserved for the JSON document
    each CLI invocation prints.

    Args:
        name: Logger name
        level: Logging level (DEBUG, INFO, WARNING, ERROR). Falls back to
            BKSIM_LOG_LEVEL, then INFO.
        log_file: Optional path to a log file. Falls back to BKSIM_LOG_FILE;
            no file handler when neither is set.

    Returns:
        Configured logger instance
    """
    level = level or os.getenv("BKSIM_LOG_LEVEL", "INFO")
    log_file = log_file or os.getenv("BKSIM_LOG_FILE")

    logger = logging.getLogger(name)
    logger.setLevel(getattr(logging, level.upper(), logging.INFO))

    # Remove existing handlers to avoid duplicates
    logger.handlers = []
    logger.propagate = False

    detailed_formatter = logging.Formatter(
        fmt="%(asctime)s - %(name)s - %(levelname)s - [%(filename)s:%(lineno)d] - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )

    console_formatter = logging.Formatter(
        fmt="%(asctime)s - %(levelname)s - %(message)s",
        datefmt="%H:%M:%S",
    )

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(logger.level)
    console_handler.setFormatter(console_formatter)
    logger.addHandler(console_handler)

    if log_file:
        file_handler = logging.FileHandler(log_file)
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(detailed_formatter)
        logger.addHandler(file_handler)

    return logger


def get_logger(name: str) -> logging.Logger:
    """
    Get a logger under the bksim hierarchy.

    Module loggers (``src.kernels.weights`` etc.) are children of the root
    ``bksim`` logger and inherit its handlers.

    Args:
        name: Logger name, usually ``__name__``

    Returns:
        Logger instance
    """
    root = logging.getLogger(ROOT_LOGGER)
    if not root.handlers:
        setup_logger(ROOT_LOGGER)
    if name == ROOT_LOGGER or name.startswith(ROOT_LOGGER + "."):
        return logging.getLogger(name)
    return logging.getLogger(f"{ROOT_LOGGER}.{name}")


def set_level(level: str) -> None:
    """Change the level of the root bksim logger and its handlers."""
    root = logging.getLogger(ROOT_LOGGER)
    numeric = getattr(logging, level.upper(), logging.INFO)
    root.setLevel(numeric)
    for handler in root.handlers:
        if isinstance(handler, logging.FileHandler):
            continue
        handler.setLevel(numeric)
