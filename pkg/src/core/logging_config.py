"""
Structured logging setup.

Modules take a logger with ``structlog.get_logger(__name__)`` and log
key-value events; ``configure_logging`` decides level and rendering once
per process.
"""

import logging
import sys

import structlog

from .config import config


def configure_logging(level: str = None, json_output: bool = None) -> None:
    """
    Configure structlog for the current process.

    Args:
        level: Log level name (defaults to config.LOG_LEVEL)
        json_output: Render JSON lines instead of console output
            (defaults to config.LOG_JSON)
    """
    level = (level or config.LOG_LEVEL).upper()
    json_output = config.LOG_JSON if json_output is None else json_output
    numeric_level = logging.getLevelName(level)
    if not isinstance(numeric_level, int):
        raise ValueError(f"Unknown log level: {level}")

    renderer = (
        structlog.processors.JSONRenderer(sort_keys=True)
        if json_output
        else structlog.dev.ConsoleRenderer(colors=False)
    )
    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso", utc=True),
            renderer,
        ],
        wrapper_class=structlog.make_filtering_bound_logger(numeric_level),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )
