"""Exceptions raised by uqnet"""
from __future__ import annotations

from typing import Optional


class UQNetError(Exception):
    """
    Base class for every error uqnet raises on purpose
    """


class ConfigurationError(UQNetError):
    """Invalid hyperparameter, method name or config document"""


class DataError(UQNetError):
    """Dataset does not satisfy what an operation needs (empty split, missing subject, ...)"""


class FormatError(UQNetError):
    """
    Binary file does not match its declared format

    :param offset: byte offset where parsing failed
    """

    def __init__(self, message: str, offset: Optional[int] = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)


class DimensionError(UQNetError):
    """Array shapes do not chain"""


class NumericError(UQNetError):
    """
    Non-finite value produced inside the network

    :param layer: name of the layer that produced it
    """

    def __init__(self, layer: str, message: str = "non-finite values"):
        self.layer = layer
        super().__init__(f"{message} in layer {layer!r}")


class StateError(UQNetError):
    """Cached forward state does not belong to the given network/parameters"""


class UndefinedMetricError(UQNetError):
    """Metric is undefined for the given labels (e.g. AUROC with one class)"""
