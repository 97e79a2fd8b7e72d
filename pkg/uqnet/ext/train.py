import argparse
import logging
from pathlib import Path

from uqnet.app import add_run_arguments, load_run
from uqnet.config import RunConfig
from uqnet.data.epochs import EpochSet
from uqnet.data.source import load_source
from uqnet.errors import UQNetError
from uqnet.evaluation.experiment import map_cells, method_index, resolve_subjects, train_cell
from uqnet.inference import save_checkpoint
from uqnet.utils.methods import atomic_write_json

logger = logging.getLogger(__name__)

CHECKPOINTS = "checkpoints"
MANIFEST = "manifest.json"


def checkpoint_dir(root: Path, subject: int, method: str) -> Path:
    return root / f"subject_{subject:02d}" / method


def cell_order(data: EpochSet, config: RunConfig) -> list:
    methods = sorted(config.methods, key=method_index)
    return [(subject, method) for subject in resolve_subjects(data, config) for method in methods]


def train_and_save(data: EpochSet, subject: int, method: str, config: RunConfig, root: str) -> dict:
    """
    Train one cell and write its checkpoint tree

    :return: manifest entry; failures are recorded in its "error" field
    """
    path = checkpoint_dir(Path(root), subject, method)
    entry = {
        "subject": subject,
        "method": method,
        "path": path.relative_to(root).as_posix(),
        "training": [],
        "error": None,
    }
    try:
        model, results, _ = train_cell(data, subject, method, config, config.seed)
        save_checkpoint(path, model, results[0].seed)
    except UQNetError as error:
        logger.error("Training (subject %s, %s) failed: %s", subject, method, error)
        entry["error"] = f"{type(error).__name__}: {error}"
        return entry
    entry["training"] = [result.summary() for result in results]
    logger.info("Saved %s checkpoint of subject %s to %s", method, subject, path)
    return entry


def cmd_train(args: argparse.Namespace) -> int:
    """
    One checkpoint tree per (held-out subject, method), plus a manifest with
    seeds and early-stopping epochs

    :return: 1 if any cell failed
    """
    config = load_run(args)
    data = load_source(config.data)
    root = Path(config.output_dir) / CHECKPOINTS
    entries = map_cells(train_and_save, data, cell_order(data, config), config, str(root), jobs=args.jobs)
    atomic_write_json(root / MANIFEST, {"seed": config.seed, "config": config.to_dict(), "cells": entries})
    failed = [entry for entry in entries if entry["error"] is not None]
    if failed:
        logger.warning("%s of %s cells failed to train", len(failed), len(entries))
        return 1
    return 0


def setup(app):
    parser = app.add_command("train", cmd_train, "train every method for every held-out subject")
    add_run_arguments(parser)
    logger.debug("Loaded Train")
