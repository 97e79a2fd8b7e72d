"""
Entropy-based uncertainty measures, in nats

predictive entropy = expected entropy + mutual information, i.e. total
uncertainty split into its aleatoric and epistemic parts.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from uqnet.inference import PredictionSamples

PROB_FLOOR = 1e-12

Samples = Union[PredictionSamples, np.ndarray]


def _probs(samples: Samples) -> np.ndarray:
    probs = samples.probs if isinstance(samples, PredictionSamples) else PredictionSamples(samples).probs
    return probs


def _entropy(probs: np.ndarray) -> np.ndarray:
    """Entropy over the last axis, with 0 * log 0 = 0"""
    return -np.sum(probs * np.log(np.clip(probs, PROB_FLOOR, 1.0)), axis=-1)


def mean_probs(samples: Samples) -> np.ndarray:
    """
    (N, K) mean over passes

    Passes are summed in sorted order, so the result does not depend on the
    order of the T axis.
    """
    probs = _probs(samples)
    return np.sort(probs, axis=0).mean(axis=0)


def predictive_entropy(samples: Samples) -> np.ndarray:
    return _entropy(mean_probs(samples))


def expected_entropy(samples: Samples) -> np.ndarray:
    return np.sort(_entropy(_probs(samples)), axis=0).mean(axis=0)


def mutual_information(samples: Samples) -> np.ndarray:
    return predictive_entropy(samples) - expected_entropy(samples)


def classify(samples: Samples) -> np.ndarray:
    """Argmax of the mean probabilities, lowest class index on ties"""
    return np.argmax(mean_probs(samples), axis=1)


@dataclass(frozen=True, eq=False)
class UncertaintyScores:
    predictive_entropy: np.ndarray
    expected_entropy: np.ndarray
    mutual_information: np.ndarray
    predicted_class: np.ndarray
    mean_probs: np.ndarray

    def measure(self, name: str) -> np.ndarray:
        return getattr(self, name)


def compute_scores(samples: Samples) -> UncertaintyScores:
    probs = _probs(samples)
    mean = np.sort(probs, axis=0).mean(axis=0)
    total = _entropy(mean)
    aleatoric = np.sort(_entropy(probs), axis=0).mean(axis=0)
    return UncertaintyScores(
        predictive_entropy=total,
        expected_entropy=aleatoric,
        mutual_information=total - aleatoric,
        predicted_class=np.argmax(mean, axis=1),
        mean_probs=mean,
    )
