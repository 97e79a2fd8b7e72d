import pandas as pd
import pytest

from uqnet.evaluation.experiment import CellResult, ExperimentReport
from uqnet.evaluation.report import (
    ACCURACY_FILE,
    AUROC_FILE,
    REPORT_FILE,
    accuracy_table,
    format_table,
    load_report,
    plot_rejection_curves,
    write_rejection_curves,
    write_report,
)

CURVE = [[0.5, 1.0], [1.0, 0.75]]


def _cell(subject, method, within, cross, auroc):
    return CellResult(
        subject=subject,
        method=method,
        accuracy={"within": within, "cross": cross},
        auroc={"within": dict(auroc), "cross": dict(auroc)},
        rejection={"within": CURVE, "cross": CURVE},
        training=[{"seed": 1, "best_epoch": 2, "epochs_run": 4, "best_loss": 0.9}],
    )


@pytest.fixture
def report():
    cells = [
        _cell(2, "dropout", 0.25, 0.5, {"predictive_entropy": 0.6, "expected_entropy": None}),
        _cell(1, "dropout", 0.75, 0.5, {"predictive_entropy": 0.8, "expected_entropy": 0.7}),
        _cell(
            1,
            "mc_dropout",
            0.5,
            0.625,
            {"predictive_entropy": 0.65, "expected_entropy": 0.6, "mutual_information": 0.55},
        ),
        _cell(1, "duq", 0.5, 0.375, {"predictive_entropy": 0.7}),
        CellResult(subject=2, method="duq", error="DataError: boom"),
    ]
    return ExperimentReport(seed=3, methods=("dropout", "mc_dropout", "duq"), subjects=(1, 2), cells=cells)


class TestReportFiles:
    def test_cells_sorted(self, report):
        assert [(cell.subject, cell.method) for cell in report.cells] == [
            (1, "dropout"),
            (1, "mc_dropout"),
            (1, "duq"),
            (2, "dropout"),
            (2, "duq"),
        ]

    def test_writes_json_and_csvs(self, report, tmp_path):
        paths = write_report(report, tmp_path)
        assert set(paths) == {"report", "accuracy", "auroc"}
        assert load_report(tmp_path / REPORT_FILE).to_dict() == report.to_dict()

    def test_accuracy_csv(self, report, tmp_path):
        write_report(report, tmp_path)
        lines = (tmp_path / ACCURACY_FILE).read_text().splitlines()
        assert lines[0] == "subject,method,within_acc,cross_acc"
        assert lines[1] == "1,dropout,75.000000,50.000000"
        # failed cells have no row
        assert len(lines) == 5

    def test_auroc_csv(self, report, tmp_path):
        write_report(report, tmp_path)
        frame = pd.read_csv(tmp_path / AUROC_FILE)
        assert list(frame.columns) == ["subject", "method", "measure", "population", "auroc"]
        assert len(frame) == 8 + 6 + 2
        assert set(frame[frame.measure == "mutual_information"].method) == {"mc_dropout"}
        undefined = frame[(frame.subject == 2) & (frame.measure == "expected_entropy")]
        assert undefined.auroc.isna().all()
        text = (tmp_path / AUROC_FILE).read_text()
        assert "1,dropout,predictive_entropy,within,80.000000" in text
        assert "2,dropout,expected_entropy,within,\n" in text


class TestTables:
    def test_accuracy_table(self, report):
        table = accuracy_table(report)
        assert list(table.index) == ["Standard Dropout", "MC-Dropout", "DUQ"]
        assert table.loc["Standard Dropout", "Within-population"] == "50.00 ± 35.36"
        assert table.loc["MC-Dropout", "Cross-population"] == "62.50 ± 0.00"

    def test_auroc_table_marks_missing_measures(self, report):
        text = format_table(report, "within")
        assert text.startswith("Within-population misclassification AUROC (%)")
        duq_row = next(line for line in text.splitlines() if line.startswith("DUQ"))
        assert duq_row.split()[1:] == ["70.00", "±", "0.00", "-", "-"]
        assert "DUQ uncertainty: negative_max_kernel" in text
        assert "Standard Dropout: 43.75" in text

    def test_accuracy_heading(self, report):
        assert format_table(report).startswith("Accuracy (%)\n")


class TestRejectionPlots:
    def test_svg_is_deterministic(self, report):
        first = plot_rejection_curves(report, "cross")
        second = plot_rejection_curves(report, "cross")
        assert first.startswith(b"<?xml")
        assert first == second

    def test_one_file_per_population(self, report, tmp_path):
        paths = write_rejection_curves(report, tmp_path)
        assert [path.name for path in paths] == ["rejection_within.svg", "rejection_cross.svg"]
        assert all(path.stat().st_size > 0 for path in paths)
