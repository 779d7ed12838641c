"""
Logging setup for the command line.

`ALTISPLAT_LOG_LEVEL` (default INFO) and `ALTISPLAT_LOG_FORMAT` (json or
text, default text) are read from the environment; explicit arguments win.
"""

import logging
import os
import sys
from typing import Optional

from pythonjsonlogger.json import JsonFormatter

LOG_FORMATS = ('json', 'text')
TEXT_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
JSON_FIELDS = "%(asctime)s %(levelname)s %(name)s %(message)s"


def configure_logging(level: Optional[str] = None, fmt: Optional[str] = None) -> logging.Logger:
    """
    Install a single stderr handler on the `src` package logger.

    Args:
        level: Level name; falls back to ALTISPLAT_LOG_LEVEL, then INFO
        fmt: 'json' or 'text'; falls back to ALTISPLAT_LOG_FORMAT, then text

    Returns:
        The configured logger

    Raises:
        ValueError: unknown level or format
    """
    level = (level or os.environ.get('ALTISPLAT_LOG_LEVEL', 'INFO')).upper()
    fmt = (fmt or os.environ.get('ALTISPLAT_LOG_FORMAT', 'text')).lower()
    if fmt not in LOG_FORMATS:
        raise ValueError(f"Unknown log format '{fmt}', expected one of {LOG_FORMATS}")
    numeric = logging.getLevelName(level)
    if not isinstance(numeric, int):
        raise ValueError(f"Unknown log level '{level}'")

    handler = logging.StreamHandler(sys.stderr)
    if fmt == 'json':
        handler.setFormatter(JsonFormatter(JSON_FIELDS))
    else:
        handler.setFormatter(logging.Formatter(TEXT_FORMAT))

    logger = logging.getLogger('src')
    for old in list(logger.handlers):
        logger.removeHandler(old)
    logger.addHandler(handler)
    logger.setLevel(numeric)
    logger.propagate = False
    return logger
