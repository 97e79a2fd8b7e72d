"""
Accuracy, misclassification AUROC, accuracy-rejection curves and per-subject aggregation
"""
from __future__ import annotations

import logging
import math
from typing import List, NamedTuple, Sequence, Tuple

import numpy as np
from scipy.integrate import trapezoid
from scipy.stats import rankdata

from uqnet.errors import ConfigurationError, DataError, DimensionError, UndefinedMetricError

logger = logging.getLogger(__name__)

# Absorbs float error in q * N before rounding up, so 0.3 * 10 retains 3 trials
COVERAGE_SLACK = 1e-9

RejectionCurve = List[Tuple[float, float]]


class Aggregate(NamedTuple):
    mean: float
    std: float
    single_value: bool  # std is 0 because only one value was aggregated


def _paired(first: Sequence, second: Sequence, what: str) -> Tuple[np.ndarray, np.ndarray]:
    first, second = np.asarray(first), np.asarray(second)
    if first.shape != second.shape or first.ndim != 1:
        raise DimensionError(f"{what}: inputs must be 1-D and of equal length, got {first.shape} and {second.shape}")
    if first.size == 0:
        raise DataError(f"{what}: empty input")
    return first, second


def accuracy(predicted: Sequence[int], truth: Sequence[int]) -> float:
    predicted, truth = _paired(predicted, truth, "accuracy")
    return float(np.mean(predicted == truth))


def auroc(scores: Sequence[float], positives: Sequence[bool]) -> float:
    """
    Mann-Whitney estimate of P(score_pos > score_neg) + 1/2 P(score_pos == score_neg)

    :raises UndefinedMetricError: when all flags are equal
    """
    scores, positives = _paired(scores, positives, "auroc")
    positives = positives.astype(bool)
    n_pos = int(positives.sum())
    n_neg = positives.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUROC needs at least one positive and one negative")
    ranks = rankdata(np.asarray(scores, dtype=np.float64), method="average")
    u_statistic = ranks[positives].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u_statistic / (n_pos * n_neg))


def misclassification_auroc(scores: Sequence[float], predicted: Sequence[int], truth: Sequence[int]) -> float:
    """
    How well the uncertainty scores rank wrong predictions above correct ones

    :raises UndefinedMetricError: if every prediction is right, or every one is wrong
    """
    predicted, truth = _paired(predicted, truth, "misclassification_auroc")
    return auroc(scores, predicted != truth)


def rejection_curve(
    scores: Sequence[float], correct: Sequence[bool], coverages: Sequence[float]
) -> RejectionCurve:
    """
    For every coverage q keep the ceil(q * N) least uncertain trials, ties
    broken by trial index, and report their accuracy

    :return: [(coverage, accuracy on retained trials), ...] in grid order
    :raises ConfigurationError: on an empty grid or coverage outside (0, 1]
    """
    if len(coverages) == 0:
        raise ConfigurationError("Coverage grid is empty")
    scores, correct = _paired(scores, correct, "rejection_curve")
    correct = correct.astype(bool)
    order = np.lexsort((np.arange(scores.size), scores))
    kept_correct = np.cumsum(correct[order])
    curve = []
    for coverage in coverages:
        if not 0 < coverage <= 1:
            raise ConfigurationError(f"Coverage {coverage} outside (0, 1]")
        retained = min(scores.size, max(1, math.ceil(coverage * scores.size - COVERAGE_SLACK)))
        curve.append((float(coverage), float(kept_correct[retained - 1] / retained)))
    return curve


def area_under_rejection_curve(curve: RejectionCurve) -> float:
    """Trapezoidal area under accuracy against coverage"""
    if len(curve) < 2:
        return float(curve[0][1]) if curve else 0.0
    points = sorted(curve)
    coverage, accuracy_values = zip(*points)
    return float(trapezoid(accuracy_values, coverage))


def aggregate_mean_std(values: Sequence[float]) -> Aggregate:
    """
    Arithmetic mean and sample (n - 1) standard deviation; a single value has
    std 0 and is flagged with single_value

    :raises DataError: on empty input
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise DataError("Nothing to aggregate")
    if values.size == 1:
        logger.debug("Single value aggregated, standard deviation reported as 0")
        return Aggregate(float(values[0]), 0.0, True)
    return Aggregate(float(values.mean()), float(values.std(ddof=1)), False)
