import math
from fractions import Fraction

import numpy as np
import pytest

from uqnet.errors import ConfigurationError, DataError, DimensionError, UndefinedMetricError
from uqnet.evaluation.metrics import (
    accuracy,
    aggregate_mean_std,
    area_under_rejection_curve,
    auroc,
    misclassification_auroc,
    rejection_curve,
)

GRID = tuple(round(0.1 * step, 2) for step in range(1, 11))


def _pairwise_auroc(scores, positives):
    pos = [s for s, flag in zip(scores, positives) if flag]
    neg = [s for s, flag in zip(scores, positives) if not flag]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


def _threshold_curve(scores, correct, coverages):
    order = sorted(range(len(scores)), key=lambda index: (scores[index], index))
    curve = []
    for coverage in coverages:
        kept = max(1, math.ceil(Fraction(str(coverage)) * len(scores)))
        curve.append((coverage, sum(correct[index] for index in order[:kept]) / kept))
    return curve


class TestAccuracy:
    def test_fraction_correct(self):
        assert accuracy([0, 1, 2, 3], [0, 1, 0, 0]) == 0.5

    def test_shapes(self):
        with pytest.raises(DimensionError):
            accuracy([0, 1], [0])
        with pytest.raises(DataError):
            accuracy([], [])


class TestAUROC:
    def test_examples(self):
        assert auroc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75
        assert auroc([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0]) == 1.0
        assert auroc([0.5, 0.5, 0.5, 0.5], [1, 0, 1, 0]) == 0.5

    def test_matches_pairwise_count_with_ties(self):
        rng = np.random.default_rng(81)
        scores = rng.integers(0, 6, size=100).astype(float)
        positives = rng.random(100) < 0.4
        assert auroc(scores, positives) == pytest.approx(_pairwise_auroc(scores, positives), abs=1e-12)

    def test_one_class_only(self):
        with pytest.raises(UndefinedMetricError):
            auroc([0.1, 0.2], [1, 1])
        with pytest.raises(UndefinedMetricError):
            misclassification_auroc([0.1, 0.2], [0, 1], [0, 1])

    def test_misclassification_positives_are_errors(self):
        assert misclassification_auroc([0.9, 0.1, 0.2], [1, 0, 0], [0, 0, 0]) == 1.0


class TestRejectionCurve:
    def test_example(self):
        curve = rejection_curve([0.9, 0.1, 0.5, 0.1], [0, 1, 1, 0], (0.25, 0.5, 0.75, 1.0))
        assert curve[0] == (0.25, 1.0)
        assert curve[1] == (0.5, 0.5)
        assert curve[2][1] == pytest.approx(2 / 3)
        assert curve[3] == (1.0, 0.5)

    def test_matches_threshold_oracle(self):
        rng = np.random.default_rng(82)
        for size in (1, 7, 10, 37, 100):
            scores = rng.integers(0, 5, size=size).astype(float).tolist()
            correct = (rng.random(size) < 0.6).tolist()
            assert rejection_curve(scores, correct, GRID) == _threshold_curve(scores, correct, GRID)

    def test_full_coverage_is_accuracy(self):
        rng = np.random.default_rng(83)
        correct = rng.random(50) < 0.5
        assert rejection_curve(rng.random(50), correct, (1.0,))[0][1] == pytest.approx(correct.mean())

    def test_grid_validation(self):
        with pytest.raises(ConfigurationError):
            rejection_curve([0.1], [1], ())
        with pytest.raises(ConfigurationError):
            rejection_curve([0.1], [1], (0.0,))
        with pytest.raises(ConfigurationError):
            rejection_curve([0.1], [1], (1.2,))

    def test_area(self):
        assert area_under_rejection_curve([(1.0, 0.5), (0.5, 1.0)]) == pytest.approx(0.375)
        assert area_under_rejection_curve([(1.0, 0.8)]) == 0.8


class TestAggregate:
    def test_sample_standard_deviation(self):
        mean, std, single_value = aggregate_mean_std([0.0, 2.0])
        assert mean == 1.0
        assert std == pytest.approx(math.sqrt(2.0))
        assert not single_value

    def test_single_value_is_flagged(self):
        result = aggregate_mean_std([0.7])
        assert result == (0.7, 0.0, True)
        assert result.single_value

    def test_empty(self):
        with pytest.raises(DataError):
            aggregate_mean_std([])
