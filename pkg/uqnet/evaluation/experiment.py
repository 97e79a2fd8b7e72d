"""
Leave-one-subject-out experiment: partition, train every method, score it

Every cell is a (held-out subject, method) pair. Random streams are derived
from the master seed with keys that name the cell, never from execution
order, so the report is the same whether cells run in one process or many:

    split      derive_rng(seed, subject, PURPOSE_SPLIT)
    training   derive_rng(seed, subject, method index, PURPOSE_INIT)
    inference  derive_rng(seed, subject, method index, PURPOSE_INFERENCE)

where the method index is the position in config.METHODS.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from uqnet.config import MEASURES, METHODS, POPULATIONS, STANDARD_METHODS, RunConfig
from uqnet.data.epochs import EpochSet
from uqnet.errors import ConfigurationError, DataError, UndefinedMetricError, UQNetError
from uqnet.evaluation.metrics import (
    accuracy,
    aggregate_mean_std,
    area_under_rejection_curve,
    misclassification_auroc,
    rejection_curve,
)
from uqnet.evaluation.split import Split, loso_partition
from uqnet.inference import Model, duq_predict, predict_samples
from uqnet.measures import compute_scores
from uqnet.training import TrainingResult, fit_method
from uqnet.utils.methods import PURPOSE_INFERENCE, PURPOSE_INIT, PURPOSE_SPLIT, derive_rng

logger = logging.getLogger(__name__)

DUQ_UNCERTAINTY = "negative_max_kernel"
REPORT_VERSION = 1


def measures_for(method: str) -> Tuple[str, ...]:
    """
    Measures reported for a method: no mutual information for single-pass
    baselines, and a single kernel-based column for DUQ
    """
    if method == "duq":
        return ("predictive_entropy",)
    if method in STANDARD_METHODS:
        return ("predictive_entropy", "expected_entropy")
    return MEASURES


def method_index(method: str) -> int:
    return METHODS.index(method)


@dataclass
class CellResult:
    """
    Scores of one method trained without one subject

    auroc maps population -> measure -> value; an applicable measure whose
    AUROC is undefined (all predictions right or all wrong) maps to None.
    """

    subject: int
    method: str
    accuracy: Dict[str, Optional[float]] = field(default_factory=dict)
    auroc: Dict[str, Dict[str, Optional[float]]] = field(default_factory=dict)
    rejection: Dict[str, List[List[float]]] = field(default_factory=dict)
    training: List[dict] = field(default_factory=list)
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    def to_dict(self) -> dict:
        return {
            "subject": self.subject,
            "method": self.method,
            "accuracy": self.accuracy,
            "auroc": self.auroc,
            "rejection": self.rejection,
            "training": self.training,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CellResult":
        return cls(
            subject=int(data["subject"]),
            method=str(data["method"]),
            accuracy=dict(data.get("accuracy", {})),
            auroc={population: dict(values) for population, values in data.get("auroc", {}).items()},
            rejection={population: [list(point) for point in curve] for population, curve in data.get("rejection", {}).items()},
            training=list(data.get("training", [])),
            error=data.get("error"),
        )


def _cell_key(cell: CellResult) -> Tuple[int, int]:
    return cell.subject, method_index(cell.method)


def _aggregate(values: List[float]) -> Optional[dict]:
    if not values:
        return None
    aggregate = aggregate_mean_std(values)
    return {"mean": aggregate.mean, "std": aggregate.std, "n": len(values), "single_value": aggregate.single_value}


@dataclass
class ExperimentReport:
    """
    Per-subject cells plus their mean and standard deviation across subjects
    """

    seed: int
    methods: Tuple[str, ...]
    subjects: Tuple[int, ...]
    cells: List[CellResult]
    config: dict = field(default_factory=dict)
    duq_uncertainty: str = DUQ_UNCERTAINTY

    def __post_init__(self):
        self.cells = sorted(self.cells, key=_cell_key)

    @property
    def failed_cells(self) -> List[CellResult]:
        return [cell for cell in self.cells if cell.failed]

    def cells_of(self, method: str) -> List[CellResult]:
        return [cell for cell in self.cells if cell.method == method and not cell.failed]

    def aggregates(self) -> dict:
        """
        accuracy[method][population] and auroc[method][population][measure],
        each {"mean", "std", "n", "single_value"} or None without any value
        """
        accuracies: Dict[str, Dict[str, Optional[dict]]] = {}
        aurocs: Dict[str, Dict[str, Dict[str, Optional[dict]]]] = {}
        for method in self.methods:
            cells = self.cells_of(method)
            accuracies[method] = {
                population: _aggregate([cell.accuracy[population] for cell in cells if cell.accuracy.get(population) is not None])
                for population in POPULATIONS
            }
            aurocs[method] = {
                population: {
                    measure: _aggregate(
                        [
                            cell.auroc[population][measure]
                            for cell in cells
                            if cell.auroc.get(population, {}).get(measure) is not None
                        ]
                    )
                    for measure in measures_for(method)
                }
                for population in POPULATIONS
            }
        return {"accuracy": accuracies, "auroc": aurocs}

    def mean_rejection_curve(self, method: str, population: str) -> List[Tuple[float, float]]:
        """Accuracy at every coverage averaged over subjects"""
        curves = [cell.rejection[population] for cell in self.cells_of(method) if population in cell.rejection]
        if not curves:
            return []
        stacked = np.asarray(curves, dtype=np.float64)
        return [(float(q), float(a)) for q, a in zip(stacked[0, :, 0], stacked[:, :, 1].mean(axis=0))]

    def rejection_areas(self, population: str) -> Dict[str, Optional[float]]:
        areas = {}
        for method in self.methods:
            curve = self.mean_rejection_curve(method, population)
            areas[method] = area_under_rejection_curve(curve) if curve else None
        return areas

    def to_dict(self) -> dict:
        return {
            "version": REPORT_VERSION,
            "seed": self.seed,
            "methods": list(self.methods),
            "subjects": list(self.subjects),
            "duq_uncertainty": self.duq_uncertainty,
            "config": self.config,
            "cells": [cell.to_dict() for cell in self.cells],
            "aggregates": self.aggregates(),
        }

    @classmethod
    def from_dict(cls, data: Any) -> "ExperimentReport":
        """
        :raises DataError: if data is not a report document
        """
        try:
            if data.get("version") != REPORT_VERSION:
                raise DataError(f"Unsupported report version {data.get('version')!r}")
            methods = tuple(data["methods"])
            for method in methods:
                if method not in METHODS:
                    raise DataError(f"Report names unknown method {method!r}")
            return cls(
                seed=int(data["seed"]),
                methods=methods,
                subjects=tuple(int(subject) for subject in data["subjects"]),
                cells=[CellResult.from_dict(cell) for cell in data["cells"]],
                config=dict(data.get("config", {})),
                duq_uncertainty=str(data.get("duq_uncertainty", DUQ_UNCERTAINTY)),
            )
        except (AttributeError, KeyError, TypeError, ValueError) as error:
            raise DataError(f"Malformed report: {error!r}") from error


def split_for(data: EpochSet, subject: int, config: RunConfig, seed: int) -> Split:
    return loso_partition(
        data,
        subject,
        within_frac=config.split.within_frac,
        val_frac=config.split.val_frac,
        rng=derive_rng(seed, subject, PURPOSE_SPLIT),
    )


def train_cell(
    data: EpochSet, subject: int, method: str, config: RunConfig, seed: int
) -> Tuple[Model, List[TrainingResult], Split]:
    split = split_for(data, subject, config, seed)
    rng = derive_rng(seed, subject, method_index(method), PURPOSE_INIT)
    model, results = fit_method(method, split, config, rng)
    return model, results, split


def evaluate_cell(
    model: Model, method: str, split: Split, config: RunConfig, seed: int, training: Sequence[dict] = ()
) -> CellResult:
    """
    Accuracy, measure AUROCs and the rejection curve on both held-out populations

    The rejection curve ranks trials by predictive entropy, or by the DUQ
    kernel uncertainty.
    """
    rng = derive_rng(seed, split.held_out_subject, method_index(method), PURPOSE_INFERENCE)
    cell = CellResult(subject=split.held_out_subject, method=method, training=list(training))
    for population, epochs in (("within", split.within_population), ("cross", split.cross_population)):
        if len(epochs) == 0:
            raise DataError(f"The {population}-population set of subject {split.held_out_subject} is empty")
        if method == "duq":
            prediction = duq_predict(model, epochs.data)
            predicted = prediction.predicted
            scores = {"predictive_entropy": prediction.uncertainty}
        else:
            uncertainty = compute_scores(predict_samples(model, epochs.data, config.passes, rng))
            predicted = uncertainty.predicted_class
            scores = {measure: uncertainty.measure(measure) for measure in measures_for(method)}

        cell.accuracy[population] = accuracy(predicted, epochs.labels)
        cell.auroc[population] = {}
        for measure, values in scores.items():
            try:
                cell.auroc[population][measure] = misclassification_auroc(values, predicted, epochs.labels)
            except UndefinedMetricError:
                logger.warning(
                    "AUROC of %s/%s undefined for subject %s (%s population)",
                    method,
                    measure,
                    split.held_out_subject,
                    population,
                )
                cell.auroc[population][measure] = None
        curve = rejection_curve(scores["predictive_entropy"], predicted == epochs.labels, config.coverages)
        cell.rejection[population] = [[coverage, value] for coverage, value in curve]
    return cell


def run_cell(data: EpochSet, subject: int, method: str, config: RunConfig, seed: int) -> CellResult:
    """
    Train and evaluate one cell; uqnet errors are recorded on the cell instead of raised
    """
    try:
        model, results, split = train_cell(data, subject, method, config, seed)
        cell = evaluate_cell(model, method, split, config, seed, [result.summary() for result in results])
    except UQNetError as error:
        logger.error("Cell (subject %s, %s) failed: %s", subject, method, error)
        return CellResult(subject=subject, method=method, error=f"{type(error).__name__}: {error}")
    logger.info(
        "Subject %s %s: within %.4f, cross %.4f",
        subject,
        method,
        cell.accuracy["within"],
        cell.accuracy["cross"],
    )
    return cell


def map_cells(
    function: Callable, data: EpochSet, order: Sequence[Tuple[int, str]], *args, jobs: int = 1
) -> list:
    """
    function(data, subject, method, *args) for every cell, results in the order of ``order``

    With jobs > 1 cells run in joblib worker processes; function must then be
    importable at module level.
    """
    if jobs < 1:
        raise ConfigurationError("jobs must be >= 1")
    if jobs == 1:
        return [function(data, subject, method, *args) for subject, method in order]
    return Parallel(n_jobs=jobs)(delayed(function)(data, subject, method, *args) for subject, method in order)


def resolve_subjects(data: EpochSet, config: RunConfig) -> Tuple[int, ...]:
    """
    Held-out subjects of the run, all subjects unless the config names some

    :raises DataError: with fewer than 2 subjects or an unknown subject
    """
    available = data.subjects()
    if len(available) < 2:
        raise DataError("Leave-one-subject-out needs at least 2 subjects")
    if config.subjects is None:
        return tuple(available)
    missing = sorted(set(config.subjects) - set(available))
    if missing:
        raise DataError(f"Subjects {missing} are not in the data set")
    return tuple(sorted(set(config.subjects)))


def run_experiment(
    data: EpochSet,
    methods: Optional[Sequence[str]] = None,
    config: Optional[RunConfig] = None,
    seed: Optional[int] = None,
    jobs: int = 1,
) -> ExperimentReport:
    """
    Every (held-out subject, method) cell, in parallel when jobs > 1

    :param methods: defaults to config.methods
    :param seed: master seed, defaults to config.seed
    """
    if config is None:
        raise ConfigurationError("run_experiment needs a RunConfig")
    methods = tuple(config.methods if methods is None else methods)
    for method in methods:
        if method not in METHODS:
            raise ConfigurationError(f"Unknown method {method!r}")
    seed = config.seed if seed is None else seed
    subjects = resolve_subjects(data, config)
    order = [(subject, method) for subject in subjects for method in sorted(methods, key=method_index)]
    logger.info("Running %s cells (%s subjects x %s methods) with %s job(s)", len(order), len(subjects), len(methods), jobs)

    cells = map_cells(run_cell, data, order, config, seed, jobs=jobs)

    report = ExperimentReport(
        seed=seed,
        methods=tuple(sorted(methods, key=method_index)),
        subjects=subjects,
        cells=cells,
        config=config.with_seed(seed).to_dict(),
    )
    if report.failed_cells:
        logger.warning("%s of %s cells failed", len(report.failed_cells), len(cells))
    return report
