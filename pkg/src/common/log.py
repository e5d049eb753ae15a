"""
Logging setup built on loguru.

Library modules only call ``logger``; sinks are installed here, once,
by the CLI or the project scripts.
"""

import sys
from pathlib import Path
from typing import Optional, Union

from loguru import logger

CONSOLE_FORMAT = (
    "<green>{time:HH:mm:ss}</green> | <level>{level: <7}</level> | "
    "<cyan>{name}</cyan> - <level>{message}</level>"
)


def setup_logging(level: str = "INFO",
                  log_file: Optional[Union[str, Path]] = None,
                  json_file: Optional[Union[str, Path]] = None) -> None:
    """
    Install console and optional file sinks.

    Args:
        level: Minimum level for the console sink
        log_file: Optional human-readable log file (rotated at 10 MB)
        json_file: Optional serialized sink, one JSON record per line
    """
    logger.remove()
    logger.add(sys.stderr, level=level.upper(), format=CONSOLE_FORMAT)

    if log_file is not None:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        logger.add(str(log_file), level="DEBUG", rotation="10 MB")

    if json_file is not None:
        Path(json_file).parent.mkdir(parents=True, exist_ok=True)
        logger.add(str(json_file), level="DEBUG", serialize=True)
