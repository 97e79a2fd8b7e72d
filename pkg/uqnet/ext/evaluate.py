import argparse
import logging
from pathlib import Path

from uqnet.app import add_run_arguments, load_run
from uqnet.config import RunConfig, read_json
from uqnet.data.epochs import EpochSet
from uqnet.data.source import load_source
from uqnet.errors import ConfigurationError, UQNetError
from uqnet.evaluation.experiment import CellResult, ExperimentReport, evaluate_cell, map_cells, method_index, split_for
from uqnet.evaluation.report import write_report
from uqnet.ext.train import CHECKPOINTS, MANIFEST, cell_order, checkpoint_dir
from uqnet.inference import load_checkpoint

logger = logging.getLogger(__name__)


def evaluate_checkpoint(
    data: EpochSet, subject: int, method: str, config: RunConfig, root: str, training: dict
) -> CellResult:
    """
    Score a saved cell; a missing or unreadable checkpoint becomes a failed cell
    """
    path = checkpoint_dir(Path(root), subject, method)
    if not path.exists():
        logger.warning("Missing checkpoint %s", path)
        return CellResult(subject=subject, method=method, error=f"Missing checkpoint {path}")
    try:
        model = load_checkpoint(path)
        split = split_for(data, subject, config, config.seed)
        return evaluate_cell(model, method, split, config, config.seed, training.get(f"{subject}/{method}", []))
    except UQNetError as error:
        logger.error("Evaluation (subject %s, %s) failed: %s", subject, method, error)
        return CellResult(subject=subject, method=method, error=f"{type(error).__name__}: {error}")


def training_summaries(root: Path, config: RunConfig) -> dict:
    """
    Early-stopping records of the training manifest, keyed "subject/method"

    :raises ConfigurationError: if the checkpoints were trained with another seed
    """
    path = root / MANIFEST
    if not path.exists():
        logger.warning("No training manifest in %s", root)
        return {}
    manifest = read_json(path)
    if manifest.get("seed") != config.seed:
        raise ConfigurationError(f"Checkpoints in {root} were trained with seed {manifest.get('seed')}, not {config.seed}")
    return {f"{entry['subject']}/{entry['method']}": entry.get("training", []) for entry in manifest.get("cells", [])}


def cmd_evaluate(args: argparse.Namespace) -> int:
    """
    :return: 1 if any cell is missing or failed
    """
    config = load_run(args)
    data = load_source(config.data)
    root = Path(args.checkpoints) if args.checkpoints else Path(config.output_dir) / CHECKPOINTS
    training = training_summaries(root, config)
    cells = map_cells(evaluate_checkpoint, data, cell_order(data, config), config, str(root), training, jobs=args.jobs)
    report = ExperimentReport(
        seed=config.seed,
        methods=tuple(sorted(config.methods, key=method_index)),
        subjects=tuple(sorted({cell.subject for cell in cells})),
        cells=cells,
        config=config.to_dict(),
    )
    write_report(report, config.output_dir)
    if report.failed_cells:
        logger.warning("%s of %s cells failed", len(report.failed_cells), len(cells))
        return 1
    return 0


def setup(app):
    parser = app.add_command("evaluate", cmd_evaluate, "score saved checkpoints and write the report")
    add_run_arguments(parser)
    parser.add_argument("--checkpoints", help="checkpoint directory, defaults to <output_dir>/checkpoints")
    logger.debug("Loaded Evaluate")
