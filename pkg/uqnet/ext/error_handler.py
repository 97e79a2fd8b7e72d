import logging
from typing import Optional

from uqnet.errors import ConfigurationError, FormatError, UQNetError

logger = logging.getLogger(__name__)

# Exit codes
USAGE_ERROR = 2
FAILURE = 1


def on_command_error(error: BaseException) -> Optional[int]:
    """
    Known errors become a one-line log message and an exit code; anything
    else is logged with its traceback and re-raised by the app
    """
    if isinstance(error, (ConfigurationError, FormatError)):
        logger.error("%s", error)
        return USAGE_ERROR
    elif isinstance(error, UQNetError):
        logger.error("%s: %s", type(error).__name__, error)
        return FAILURE
    elif isinstance(error, OSError):
        logger.error("%s", error)
        return FAILURE
    else:
        logger.exception("Unexpected error")
        return None


def setup(app):
    app.add_error_hook(on_command_error)
    logger.debug("Loaded ErrorHandler")
