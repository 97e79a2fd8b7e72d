import argparse
import dataclasses
import importlib
import logging
import pkgutil
from typing import Callable, Dict, List, Optional, Sequence

from uqnet import __version__, log
from uqnet.config import RunConfig, load_run_config, validate_seed

logger = logging.getLogger(__name__)

Handler = Callable[[argparse.Namespace], int]
ErrorHook = Callable[[BaseException], Optional[int]]


class UQNetApp:
    """
    Command-line application. Subcommands and error hooks are registered by
    the modules of ``uqnet.ext`` through their ``setup(app)`` function.
    """

    def __init__(self, prog: str = "uqnet", setup_logging: bool = True):
        self.parser = argparse.ArgumentParser(
            prog=prog,
            description="Uncertainty quantification for cross-subject EEG classification",
        )
        self.parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
        self.parser.add_argument("-v", "--verbose", action="store_true", help="log at DEBUG level")
        self.subparsers = self.parser.add_subparsers(dest="command", metavar="command")
        self.subparsers.required = True
        self.commands: Dict[str, Handler] = {}
        self.error_hooks: List[ErrorHook] = []
        self.extensions: List[str] = []
        self.setup_logging = setup_logging

    @classmethod
    def create(cls, setup_logging: bool = True) -> "UQNetApp":
        """Create an app with every extension of uqnet.ext loaded."""
        app = cls(setup_logging=setup_logging)
        app.load_extensions("uqnet.ext")
        return app

    def load_extensions(self, package: str) -> None:
        module = importlib.import_module(package)
        for info in sorted(pkgutil.iter_modules(module.__path__), key=lambda item: item.name):
            extension = importlib.import_module(f"{package}.{info.name}")
            setup = getattr(extension, "setup", None)
            if setup is None:
                continue
            setup(self)
            self.extensions.append(info.name)

    def add_command(self, name: str, handler: Handler, help: str) -> argparse.ArgumentParser:
        parser = self.subparsers.add_parser(name, help=help, description=help)
        parser.set_defaults(handler=handler)
        self.commands[name] = handler
        return parser

    def add_error_hook(self, hook: ErrorHook) -> None:
        self.error_hooks.append(hook)

    def run(self, argv: Optional[Sequence[str]] = None) -> int:
        """
        Parse argv and run the selected command

        :return: process exit code
        """
        args = self.parser.parse_args(argv)
        if self.setup_logging:
            log.setup(logging.DEBUG if args.verbose else None)
        logger.debug("Loaded extensions: %s", ", ".join(self.extensions))
        try:
            return int(args.handler(args) or 0)
        except Exception as error:
            for hook in self.error_hooks:
                code = hook(error)
                if code is not None:
                    return code
            raise


def add_run_arguments(parser: argparse.ArgumentParser, jobs: bool = True) -> None:
    """Flags shared by the commands that take a run config"""
    parser.add_argument("--config", required=True, help="run config JSON")
    parser.add_argument("--out", help="output directory, overrides output_dir")
    parser.add_argument("--seed", type=int, help="master seed (u64), overrides the config")
    if jobs:
        parser.add_argument("--jobs", type=int, default=1, help="cells run in parallel")


def load_run(args: argparse.Namespace) -> RunConfig:
    config = load_run_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["seed"] = validate_seed(args.seed)
    if args.out is not None:
        changes["output_dir"] = args.out
    return dataclasses.replace(config, **changes) if changes else config
