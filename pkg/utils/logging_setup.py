# utils/logging_setup.py

import logging

from config import Config

_configured = False


def setup_logging(level=None, log_file=None):
    """Setup process-wide logging once"""
    global _configured
    if _configured:
        return
    handlers = [logging.StreamHandler()]
    log_file = log_file or Config.LOG_FILE
    if log_file:
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(
        level=getattr(logging, (level or Config.LOG_LEVEL), logging.INFO),
        format='%(asctime)s - %(levelname)s - %(message)s',
        handlers=handlers
    )
    _configured = True
