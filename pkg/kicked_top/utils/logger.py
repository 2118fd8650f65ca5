"""
@description
A basic logging utility for the kicked-top simulator.

Key features:
- Initializes and configures Python's built-in logging
- Exposes a function to retrieve a named logger
- Lets the entry script raise or lower the level at runtime

@dependencies
- Python's standard `logging` library

@notes
- Other modules import `get_logger` to emit logs under a shared configuration
- Logging level defaults to INFO; KICKED_TOP_LOG_LEVEL overrides it
"""

import logging
import os

# Configure the root logger only once, setting a basic format and INFO level
logging.basicConfig(
    level=os.getenv("KICKED_TOP_LOG_LEVEL", "INFO").upper(),
    format="%(asctime)s [%(levelname)s] %(name)s: %(message)s"
)

def get_logger(name: str = __name__) -> logging.Logger:
    """
    Retrieve a logger with the given name, using the shared logging configuration.

    :param name: The logger name (usually the calling module's __name__)
    :return: A logger instance
    """
    return logging.getLogger(name)

def set_log_level(level: str) -> None:
    """
    Change the level of the root logger, e.g. from a --log-level flag.

    :param level: A level name such as "DEBUG" or "warning"
    """
    logging.getLogger().setLevel(level.upper())
