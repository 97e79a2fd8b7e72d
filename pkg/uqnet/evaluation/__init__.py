"""Leave-one-subject-out harness: splits, metrics, experiments and reports"""
from uqnet.evaluation.experiment import CellResult, ExperimentReport, evaluate_cell, run_experiment, train_cell
from uqnet.evaluation.metrics import (
    accuracy,
    aggregate_mean_std,
    area_under_rejection_curve,
    auroc,
    misclassification_auroc,
    rejection_curve,
)
from uqnet.evaluation.split import Split, loso_partition

__all__ = [
    "CellResult",
    "ExperimentReport",
    "Split",
    "accuracy",
    "aggregate_mean_std",
    "area_under_rejection_curve",
    "auroc",
    "evaluate_cell",
    "loso_partition",
    "misclassification_auroc",
    "rejection_curve",
    "run_experiment",
    "train_cell",
]
