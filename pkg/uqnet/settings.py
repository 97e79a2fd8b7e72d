from __future__ import annotations

import logging

from uqnet import config

logger = logging.getLogger(__name__)

DEBUG = config.LOG_LEVEL == "DEBUG"
LOG_LEVEL = getattr(logging, config.LOG_LEVEL, None)

if not isinstance(LOG_LEVEL, int):
    raise ValueError(f"UQNET_LOG must be a logging level name, got {config.LOG_LEVEL!r}")

if set(config.METHODS) != set(config.METHOD_VARIANTS) or set(config.METHODS) != set(config.METHOD_NAMES):
    raise ValueError("Method registry is inconsistent")

if not set(config.STANDARD_METHODS) <= set(config.METHODS):
    raise ValueError("Standard baselines must be registered methods")
