import argparse
import logging
from pathlib import Path

from uqnet.config import POPULATIONS
from uqnet.evaluation.report import format_table, load_report, write_rejection_curves

logger = logging.getLogger(__name__)


def cmd_report(args: argparse.Namespace) -> int:
    """
    Print the accuracy and AUROC grids and write the rejection-curve SVGs
    """
    report = load_report(args.report)
    print(format_table(report))
    for population in POPULATIONS:
        print(format_table(report, population))
    if report.failed_cells:
        logger.warning("Report has %s failed cells, shown as '-'", len(report.failed_cells))
    out = Path(args.out) if args.out else Path(args.report).parent
    write_rejection_curves(report, out)
    return 0


def setup(app):
    parser = app.add_command("report", cmd_report, "print result tables and draw rejection curves")
    parser.add_argument("report", help="report.json written by evaluate or experiment")
    parser.add_argument("--out", help="directory for the SVG files, defaults to the report's")
    logger.debug("Loaded Report")
