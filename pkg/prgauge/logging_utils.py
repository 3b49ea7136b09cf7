import logging
import os
from logging import DEBUG
from logging import INFO
from typing import Optional

from pythonjsonlogger import jsonlogger

PRGAUGE_LOGGER = "prgauge"

LOG_FILE_PATH = "logs/prgauge.log"
LOGGING_MESSAGE_FORMAT = "%(asctime)s %(name)-12s %(levelname)s %(message)s"

logger: Optional[logging.Logger] = None


def init_logging(debug: bool, log_file_path: str = LOG_FILE_PATH):
    global logger  # pylint:disable=W0603
    if logger:
        return
    log_level = DEBUG if debug else INFO
    file_handler = _get_file_logger(log_file_path)
    console_handler = _get_console_logger()
    logger = logging.getLogger(PRGAUGE_LOGGER)
    logger.setLevel(log_level)
    logger.addHandler(console_handler)
    logger.addHandler(file_handler)
    apply_default_formatter(file_handler)
    apply_default_formatter(console_handler)
    logger.propagate = False


def _get_file_logger(log_file_path: str) -> logging.FileHandler:
    os.makedirs(os.path.dirname(log_file_path), exist_ok=True)
    file_handler = logging.FileHandler(log_file_path)
    file_handler.setLevel(logging.DEBUG)
    return file_handler


def _get_console_logger() -> logging.StreamHandler:
    console_handler = logging.StreamHandler()
    console_handler.setLevel(logging.DEBUG)
    return console_handler


def apply_default_formatter(handler: logging.Handler):
    formatter = jsonlogger.JsonFormatter(LOGGING_MESSAGE_FORMAT)
    handler.setFormatter(formatter)


def get_logger() -> logging.Logger:
    return logging.getLogger(PRGAUGE_LOGGER)
