import argparse
import logging

from uqnet.app import add_run_arguments, load_run
from uqnet.config import POPULATIONS
from uqnet.data.source import load_source
from uqnet.evaluation.experiment import run_experiment
from uqnet.evaluation.report import format_table, write_rejection_curves, write_report

logger = logging.getLogger(__name__)


def cmd_experiment(args: argparse.Namespace) -> int:
    """
    Train and evaluate every cell in one go, without checkpoints

    :return: 1 if any cell failed
    """
    config = load_run(args)
    data = load_source(config.data)
    report = run_experiment(data, config=config, jobs=args.jobs)
    write_report(report, config.output_dir)
    write_rejection_curves(report, config.output_dir)
    print(format_table(report))
    for population in POPULATIONS:
        print(format_table(report, population))
    return 1 if report.failed_cells else 0


def setup(app):
    parser = app.add_command("experiment", cmd_experiment, "train and evaluate in one process, no checkpoints")
    add_run_arguments(parser)
    logger.debug("Loaded Experiment")
