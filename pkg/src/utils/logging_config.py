import os
import logging
from logging.handlers import RotatingFileHandler
from typing import Optional

from src.config.settings import settings


def setup_logging(log_dir: Optional[str] = None):
    """Configure logging for the application."""
    log_dir = log_dir or settings.LOG_DIR
    # Create logs directory if it doesn't exist
    os.makedirs(log_dir, exist_ok=True)

    # Create formatters
    console_formatter = logging.Formatter('%(levelname)s - %(message)s')
    file_formatter = logging.Formatter(settings.LOG_FORMAT)

    # Configure root logger
    root_logger = logging.getLogger()
    root_logger.setLevel(settings.LOG_LEVEL)

    # Drop handlers from an earlier call in the same process
    for handler in list(root_logger.handlers):
        if getattr(handler, "_sigmaflow", False):
            root_logger.removeHandler(handler)
            handler.close()

    # Console handler (less verbose)
    console_handler = logging.StreamHandler()
    console_handler.setLevel(settings.CONSOLE_LOG_LEVEL)
    console_handler.setFormatter(console_formatter)

    # File handlers (more verbose)
    # Main debug log file
    debug_handler = RotatingFileHandler(
        os.path.join(log_dir, 'debug.log'),
        maxBytes=10*1024*1024,  # 10MB
        backupCount=5
    )
    debug_handler.setLevel(settings.FILE_LOG_LEVEL)
    debug_handler.setFormatter(file_formatter)

    # Error log file
    error_handler = RotatingFileHandler(
        os.path.join(log_dir, 'error.log'),
        maxBytes=10*1024*1024,  # 10MB
        backupCount=5
    )
    error_handler.setLevel(logging.ERROR)
    error_handler.setFormatter(file_formatter)

    for handler in (console_handler, debug_handler, error_handler):
        handler._sigmaflow = True
        root_logger.addHandler(handler)
