import argparse
import dataclasses
import logging
from pathlib import Path

from uqnet.config import load_population_config, validate_seed
from uqnet.data.epochs import save_epochset
from uqnet.data.synthetic import synthesize_population
from uqnet.utils.methods import atomic_write_json

logger = logging.getLogger(__name__)


def sidecar_path(path: Path) -> Path:
    return path.with_name(path.name + ".json")


def cmd_generate(args: argparse.Namespace) -> int:
    """
    Write a synthetic population as an EPOC file plus a JSON sidecar echoing config and seed
    """
    config = load_population_config(args.config)
    if args.seed is not None:
        config = dataclasses.replace(config, seed=validate_seed(args.seed))
    epochs = synthesize_population(config)
    path = Path(args.out)
    save_epochset(path, epochs)
    atomic_write_json(sidecar_path(path), {"config": config.to_dict(), "seed": config.seed})
    return 0


def setup(app):
    parser = app.add_command("generate", cmd_generate, "generate a synthetic EEG population")
    parser.add_argument("--config", required=True, help="population config JSON")
    parser.add_argument("--out", default="data/population.epoc", help="EPOC file to write")
    parser.add_argument("--seed", type=int, help="generator seed (u64), overrides the config")
    logger.debug("Loaded Generate")
