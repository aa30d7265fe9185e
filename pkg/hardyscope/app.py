"""
This module sets up logging for hardyscope runs.

It configures the root logger and attaches a rotating file handler in the
configured log folder, the same way for the CLI and for library users.
"""

import logging
import os
from logging.handlers import RotatingFileHandler

from hardyscope.config import Config

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

_configured = False


def configure_logging(log_folder=None, level=None):
    """

    Configure root logging once per process.


    Args:
        log_folder (str, optional): Folder for hardyscope.log. Defaults to
            Config.LOG_FOLDER.
        level (str, optional): Log level name. Defaults to Config.LOG_LEVEL.

    Returns:
        str: Path of the log file.
    """
    global _configured  # pylint: disable=global-statement

    log_folder = log_folder or Config.LOG_FOLDER
    level = getattr(logging, (level or Config.LOG_LEVEL).upper(), logging.INFO)
    os.makedirs(log_folder, exist_ok=True)
    log_path = os.path.join(log_folder, "hardyscope.log")

    if _configured:
        logging.getLogger().setLevel(level)
        return log_path

    logging.basicConfig(level=level, format=LOG_FORMAT)

    rotating_file_handler = RotatingFileHandler(
        log_path, maxBytes=1024 * 1024 * 5, backupCount=3
    )
    rotating_file_handler.setLevel(level)
    rotating_file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
    logging.getLogger().addHandler(rotating_file_handler)

    logging.getLogger("hardyscope").setLevel(level)
    _configured = True
    logging.getLogger(__name__).debug("Logging configured, file %s", log_path)
    return log_path
