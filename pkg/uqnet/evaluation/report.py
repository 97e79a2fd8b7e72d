"""
Report files: JSON, accuracy/AUROC CSVs, console tables and rejection-curve SVGs
"""
from __future__ import annotations

import io
import logging
from pathlib import Path
from typing import Dict, List

import matplotlib
import pandas as pd
from matplotlib.figure import Figure

from uqnet.config import MEASURE_NAMES, MEASURES, METHOD_NAMES, POPULATIONS, read_json
from uqnet.evaluation.experiment import ExperimentReport, measures_for
from uqnet.utils.methods import atomic_write_bytes, atomic_write_json, atomic_write_text, format_mean_std

logger = logging.getLogger(__name__)

REPORT_FILE = "report.json"
ACCURACY_FILE = "accuracy.csv"
AUROC_FILE = "auroc.csv"
# Values in the CSVs and on the console are percentages
SCALE = 100.0
POPULATION_NAMES = {"within": "Within-population", "cross": "Cross-population"}


def accuracy_frame(report: ExperimentReport) -> pd.DataFrame:
    rows = [
        {
            "subject": cell.subject,
            "method": cell.method,
            "within_acc": _scaled(cell.accuracy.get("within")),
            "cross_acc": _scaled(cell.accuracy.get("cross")),
        }
        for cell in report.cells
        if not cell.failed
    ]
    return pd.DataFrame(rows, columns=["subject", "method", "within_acc", "cross_acc"])


def auroc_frame(report: ExperimentReport) -> pd.DataFrame:
    """
    One row per (subject, method, measure, population); measures a method does
    not report get no row, undefined AUROCs an empty value
    """
    rows = []
    for cell in report.cells:
        if cell.failed:
            continue
        for measure in measures_for(cell.method):
            for population in POPULATIONS:
                rows.append(
                    {
                        "subject": cell.subject,
                        "method": cell.method,
                        "measure": measure,
                        "population": population,
                        "auroc": _scaled(cell.auroc.get(population, {}).get(measure)),
                    }
                )
    return pd.DataFrame(rows, columns=["subject", "method", "measure", "population", "auroc"])


def _scaled(value):
    return None if value is None else value * SCALE


def _csv(frame: pd.DataFrame) -> str:
    return frame.to_csv(index=False, float_format="%.6f", lineterminator="\n")


def write_report(report: ExperimentReport, directory: Path | str) -> Dict[str, Path]:
    """
    :return: written paths by kind
    """
    directory = Path(directory)
    paths = {
        "report": atomic_write_json(directory / REPORT_FILE, report.to_dict()),
        "accuracy": atomic_write_text(directory / ACCURACY_FILE, _csv(accuracy_frame(report))),
        "auroc": atomic_write_text(directory / AUROC_FILE, _csv(auroc_frame(report))),
    }
    logger.info("Wrote report to %s", directory)
    return paths


def load_report(path: Path | str) -> ExperimentReport:
    return ExperimentReport.from_dict(read_json(path))


def _cell(aggregate) -> str:
    if aggregate is None:
        return "-"
    return format_mean_std(aggregate["mean"], aggregate["std"], SCALE)


def accuracy_table(report: ExperimentReport) -> pd.DataFrame:
    aggregates = report.aggregates()["accuracy"]
    return pd.DataFrame(
        [[_cell(aggregates[method][population]) for population in POPULATIONS] for method in report.methods],
        index=[METHOD_NAMES[method] for method in report.methods],
        columns=[POPULATION_NAMES[population] for population in POPULATIONS],
    )


def auroc_table(report: ExperimentReport, population: str) -> pd.DataFrame:
    aggregates = report.aggregates()["auroc"]
    rows = []
    for method in report.methods:
        cells = aggregates[method][population]
        rows.append([_cell(cells.get(measure)) if measure in measures_for(method) else "-" for measure in MEASURES])
    return pd.DataFrame(
        rows,
        index=[METHOD_NAMES[method] for method in report.methods],
        columns=[MEASURE_NAMES[measure] for measure in MEASURES],
    )


def format_table(report: ExperimentReport, population: str = "") -> str:
    """
    Accuracy grid when population is empty, otherwise the AUROC grid of that
    population followed by the area under each method's mean rejection curve
    """
    if not population:
        frame = accuracy_table(report)
        return f"Accuracy (%)\n{frame.to_string()}\n"
    frame = auroc_table(report, population)
    areas = report.rejection_areas(population)
    lines = [
        f"{POPULATION_NAMES[population]} misclassification AUROC (%)",
        frame.to_string(),
        "",
        "Area under the accuracy-rejection curve (%)",
    ]
    for method in report.methods:
        area = areas[method]
        lines.append(f"  {METHOD_NAMES[method]}: {'-' if area is None else f'{area * SCALE:.2f}'}")
    if "duq" in report.methods:
        lines.append(f"DUQ uncertainty: {report.duq_uncertainty}")
    return "\n".join(lines) + "\n"


def plot_rejection_curves(report: ExperimentReport, population: str) -> bytes:
    """
    Mean accuracy-rejection curve of every method as SVG
    """
    with matplotlib.rc_context({"svg.hashsalt": "uqnet", "svg.fonttype": "none"}):
        figure = Figure(figsize=(7, 5))
        axis = figure.subplots()
        for method in report.methods:
            curve = report.mean_rejection_curve(method, population)
            if not curve:
                continue
            coverage, accuracy_values = zip(*curve)
            axis.plot(coverage, [value * SCALE for value in accuracy_values], marker="o", label=METHOD_NAMES[method])
        axis.set_xlabel("Coverage")
        axis.set_ylabel("Accuracy on retained trials (%)")
        axis.set_title(f"{POPULATION_NAMES[population]} accuracy-rejection curves")
        axis.set_xlim(0, 1.02)
        axis.grid(True, alpha=0.3)
        if axis.get_legend_handles_labels()[0]:
            axis.legend(loc="lower left")
        figure.tight_layout()
        buffer = io.BytesIO()
        figure.savefig(buffer, format="svg", metadata={"Date": None})
    return buffer.getvalue()


def write_rejection_curves(report: ExperimentReport, directory: Path | str) -> List[Path]:
    directory = Path(directory)
    paths = []
    for population in POPULATIONS:
        path = atomic_write_bytes(directory / f"rejection_{population}.svg", plot_rejection_curves(report, population))
        logger.info("Saved %s rejection curves to %s", population, path)
        paths.append(path)
    return paths
