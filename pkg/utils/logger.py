# utils/logger.py
import logging
import sys
from pathlib import Path


def setup_logger(level_name, log_file=None):
    """
    Set up the root logger with a console handler and an optional file handler

    Console output goes to stderr so reports written to stdout stay parseable.

    Args:
        level_name (str): Logging level (DEBUG, INFO, WARNING, ERROR)
        log_file (str, optional): Log file name inside logs/. Defaults to None.

    Returns:
        logging.Logger: Configured logger
    """
    level = getattr(logging, level_name.upper())

    logger = logging.getLogger()
    logger.setLevel(level)

    for handler in logger.handlers[:]:
        logger.removeHandler(handler)

    formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(level)
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    if log_file:
        logs_dir = Path(__file__).parent.parent / 'logs'
        logs_dir.mkdir(exist_ok=True)
        file_handler = logging.FileHandler(logs_dir / log_file)
        file_handler.setLevel(level)
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    return logger
