"""
fp-reach command-line application

Entry point for `fp correct-orbit`, `fp ellipsoid`, `fp optimize` and
`fp sweep`. Exit codes: 0 success, 2 validation, 3 solver failure,
4 verification failure.
"""

import argparse
import asyncio
import json
import sys
from importlib.resources import files
from typing import Any, Dict, List, Optional, Sequence

import yaml
from loguru import logger

from . import __version__
from .commands import AVAILABLE_COMMANDS, BaseCommand
from .config import config
from .errors import ConfigurationError, FpReachError

DATA_DIR = files("fp_reach") / "data"

_STANDARD_FORMAT = (
    "<green>{time:YYYY-MM-DD HH:mm:ss.SSS}</green> | "
    "<level>{level: <8}</level> | "
    "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> | "
    "<level>{message}</level>"
)
_JSON_FORMAT = "{time} | {level} | {name}:{function}:{line} | {message}"


def _load_yaml(name: str) -> Dict[str, Any]:
    resource = DATA_DIR / name
    if not resource.is_file():
        return {}
    return yaml.safe_load(resource.read_text(encoding="utf-8")) or {}


def _parse_dx0(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"dx0 must be comma-separated numbers: {e}")


class FpReachApp:
    """
    Command-line application

    Owns logging setup, the command registry and the translation of
    errors into exit codes.
    """

    def __init__(self, commands: Optional[Sequence[BaseCommand]] = None):
        self.commands = {c.name: c for c in (commands or AVAILABLE_COMMANDS)}
        self.catalogue = _load_yaml("commands.yaml").get("commands", {})

    def _setup_logging(self, level: Optional[str] = None) -> None:
        """Configure loguru sinks from the environment settings"""
        logger.remove()
        settings = _load_yaml("logging.yaml")
        formats = settings.get("formatters", {})
        file_sink = settings.get("sinks", {}).get("file", {})
        serialize = config.logging.format == "json"
        if serialize:
            log_format = formats.get("json", {}).get("format", _JSON_FORMAT)
        else:
            log_format = formats.get("standard", {}).get("format", _STANDARD_FORMAT)
        sink_level = (level or config.logging.level).upper()

        # Console logging
        logger.add(
            sys.stderr,
            format=log_format,
            level=sink_level,
            colorize=not serialize,
            serialize=serialize,
        )

        # File logging (if configured)
        if config.logging.file:
            logger.add(
                config.logging.file,
                format=log_format,
                level=sink_level,
                serialize=serialize,
                rotation=file_sink.get("rotation", "1 day"),
                retention=file_sink.get("retention", "30 days"),
            )

        logger.info(f"fp-reach {__version__} starting")

    def build_parser(self) -> argparse.ArgumentParser:
        parser = argparse.ArgumentParser(
            prog="fp",
            description="Low-thrust forced periodic trajectories and reachable sets in the Earth-Moon CR3BP",
        )
        parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
        parser.add_argument("--log-level", default=None, help="override FP_LOG_LEVEL")

        common = argparse.ArgumentParser(add_help=False)
        for p, default in ((parser, None), (common, argparse.SUPPRESS)):
            p.add_argument("--config", default=default, help="toolkit configuration JSON")
            p.add_argument("--seed", type=int, default=default, help="random seed")
            p.add_argument("--out", default=default, help="output directory")

        sub = parser.add_subparsers(dest="command", required=True)
        for name, command in self.commands.items():
            entry = self.catalogue.get(name, {})
            examples = entry.get("examples", [])
            epilog = "examples:\n" + "\n".join(f"  {e}" for e in examples) if examples else None
            cp = sub.add_parser(
                name,
                parents=[common],
                help=entry.get("summary", command.description),
                description=command.description,
                epilog=epilog,
                formatter_class=argparse.RawDescriptionHelpFormatter,
            )
            if name == "ellipsoid":
                cp.add_argument("--phases", type=int, default=None)
                cp.add_argument("--plane", default=None)
            elif name == "optimize":
                cp.add_argument("--dx0", type=_parse_dx0, required=True, help="six comma-separated offsets")
                cp.add_argument("--objective", choices=("energy", "mass"), default="mass")
        return parser

    @staticmethod
    def _arguments(ns: argparse.Namespace) -> Dict[str, Any]:
        skip = {"command", "log_level"}
        return {k: v for k, v in vars(ns).items() if k not in skip and v is not None}

    async def run_command(self, name: str, arguments: Dict[str, Any]) -> Dict[str, Any]:
        command = self.commands.get(name)
        if command is None:
            raise ConfigurationError(f"Command '{name}' not found")
        logger.info(f"Executing command: {name} with arguments: {arguments}")
        return await command.execute(arguments)

    async def run(self, argv: Optional[Sequence[str]] = None) -> int:
        """Parse, execute and map the outcome onto an exit code"""
        parser = self.build_parser()
        try:
            ns = parser.parse_args(argv)
        except SystemExit as e:
            return 0 if e.code in (0, None) else ConfigurationError.exit_code

        self._setup_logging(ns.log_level)
        try:
            config.validate()
            result = await self.run_command(ns.command, self._arguments(ns))
        except FpReachError as e:
            logger.error(f"{ns.command} failed: {e}")
            return e.exit_code
        print(json.dumps(result, indent=2, default=str))
        return 0


async def main_async(argv: Optional[Sequence[str]] = None) -> int:
    """Async main entry point"""
    return await FpReachApp().run(argv)


def main(argv: Optional[Sequence[str]] = None) -> None:
    """Main entry point for the fp command"""
    try:
        code = asyncio.run(main_async(argv))
    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        code = 130
    sys.exit(code)


if __name__ == "__main__":
    main()
