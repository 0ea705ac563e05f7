import functools
import inspect
import logging
import os
from typing import Any, cast

# Python unified logging config
MAIN_LOGGER_NAME = "zachvit.main"

logging.basicConfig(
    level=os.getenv("LOG_LEVEL", "INFO"),
    format="%(asctime)s | %(levelname)s | %(name)s | %(message)s",
    force=True,
)

# Decorator for commands logging
COMMANDS_LOGGER_NAME = "zachvit.commands"
logger = logging.getLogger(COMMANDS_LOGGER_NAME)


def log_command(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        logger.info("Command called: %s | kwargs=%s", func.__name__, kwargs)
        return func(*args, **kwargs)

    cast(Any, wrapper).__signature__ = inspect.signature(func)
    return wrapper
