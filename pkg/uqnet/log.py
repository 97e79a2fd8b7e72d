import logging
import logging.handlers
import sys
from pathlib import Path
from typing import Optional

import coloredlogs

from uqnet import config, settings


def setup(level: Optional[int] = None, log_file: Optional[str] = config.LOG_FILE) -> None:
    """
    Set up loggers.

    :param level: overrides UQNET_LOG when given
    :param log_file: rotating log file, None disables file logging
    """
    level = settings.LOG_LEVEL if level is None else level
    format_string = "[%(asctime)s] [%(name)s/%(levelname)s]: %(message)s"
    root_logger = logging.getLogger()
    root_logger.setLevel(level)

    if log_file is not None:
        path = Path(log_file)
        path.parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.handlers.RotatingFileHandler(
            path,
            maxBytes=5 * (2**20),
            backupCount=10,
            encoding="utf-8",
        )
        file_handler.setFormatter(logging.Formatter(format_string))
        root_logger.addHandler(file_handler)

    logging.getLogger("matplotlib").setLevel(logging.WARNING)
    logging.getLogger("PIL").setLevel(logging.WARNING)

    coloredlogs.DEFAULT_LEVEL_STYLES = {
        **coloredlogs.DEFAULT_LEVEL_STYLES,
        "critical": {"background": "red"},
        "debug": {"color": 246},
    }
    coloredlogs.DEFAULT_LOG_FORMAT = format_string

    coloredlogs.install(level=level, stream=sys.stdout)
