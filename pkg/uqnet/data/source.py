from __future__ import annotations

import logging

from uqnet.config import DataSource
from uqnet.data.epochs import EpochSet, load_epochset
from uqnet.data.synthetic import synthesize_population

logger = logging.getLogger(__name__)


def load_source(source: DataSource) -> EpochSet:
    """
    Read the EPOC file or generate the synthetic population a run config names
    """
    if source.path is not None:
        logger.info("Loading epochs from %s", source.path)
        return load_epochset(source.path)
    return synthesize_population(source.synthetic)
