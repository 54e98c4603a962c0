# Copyright (c) 2025 CoReason, Inc.
#
# This software is proprietary and dual-licensed.
# Licensed under the Prosperity Public License 3.0 (the "License").
# A copy of the license is available at https://prosperitylicense.com/versions/3.0.0
# For details, see the LICENSE file.
# Commercial use beyond a 30-day trial requires a separate license.
#
# Source Code: https://github.com/CoReason-AI/coreason_ghast


import os
import sys
from pathlib import Path
from typing import Optional

from loguru import logger as loguru_logger

# Explicitly export logger for mypy
logger = loguru_logger

LOG_LEVEL = os.getenv("GHAST_LOG_LEVEL", "INFO").upper()
LOG_FILE = os.getenv("GHAST_LOG_FILE", "logs/ghast.log")

# Records outside a run carry run="-"; run_once binds "seed=<n>" via logger.contextualize.
CONSOLE_FORMAT = (
    "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | "
    "<level>{level: <8}</level> | "
    "<magenta>{extra[run]}</magenta> | "
    "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - "
    "<level>{message}</level>"
)


def configure_logging(level: Optional[str] = None, log_file: Optional[str] = None) -> None:
    """Install the stderr and JSON file sinks, replacing any existing ones.

    Args:
        level: Minimum level for both sinks. Defaults to GHAST_LOG_LEVEL.
        log_file: Path of the rotating JSON log; an empty string disables the file sink.
    """
    lvl = (level or LOG_LEVEL).upper()
    path = LOG_FILE if log_file is None else log_file
    logger.remove()
    logger.configure(extra={"run": "-"})
    logger.add(sys.stderr, level=lvl, format=CONSOLE_FORMAT)
    if not path:
        return
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    logger.add(
        path,
        rotation="500 MB",
        retention="10 days",
        serialize=True,
        enqueue=True,
        level=lvl,
    )


configure_logging()

__all__ = ["logger", "configure_logging", "LOG_LEVEL", "LOG_FILE"]
