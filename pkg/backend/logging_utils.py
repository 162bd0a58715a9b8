"""
Logging helpers.

All modules log through get_logger(__name__). The first call configures the
"backend" logger hierarchy from the environment (a .env file is honoured):

    LOG_LEVEL  - DEBUG / INFO / WARNING ... (default INFO)
    LOG_FILE   - optional path of an additional log file
"""

import logging
import os
from pathlib import Path

from dotenv import load_dotenv

LOG_FORMAT = "[%(asctime)s] %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"

_configured = False


def _configure() -> None:
    global _configured
    if _configured:
        return
    _configured = True

    load_dotenv()
    root = logging.getLogger("backend")
    level = os.getenv("LOG_LEVEL", "INFO").upper()
    root.setLevel(getattr(logging, level, logging.INFO))

    formatter = logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT)
    stream = logging.StreamHandler()
    stream.setFormatter(formatter)
    root.addHandler(stream)

    log_file = os.getenv("LOG_FILE")
    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(log_file)
        file_handler.setFormatter(formatter)
        root.addHandler(file_handler)


def get_logger(name: str) -> logging.Logger:
    """Return a configured logger below the "backend" hierarchy."""
    _configure()
    if not name.startswith("backend"):
        name = f"backend.{name}"
    return logging.getLogger(name)


def log(message: str, level: int = logging.INFO) -> None:
    """Log messages with timestamp"""
    get_logger("backend.run").log(level, message)
