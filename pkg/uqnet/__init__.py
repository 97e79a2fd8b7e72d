"""Uncertainty quantification for cross-subject EEG motor imagery classification"""

__version__ = "0.1.0"
