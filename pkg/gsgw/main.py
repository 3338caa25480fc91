"""Command-line entry point."""
import argparse
import sys
from pathlib import Path
from typing import List, Optional

# Core imports
from gsgw import __version__
from gsgw.core.config import settings
from gsgw.core.logging import get_logger, setup_logging
from gsgw.cli.deps import build_context
from gsgw.exceptions.handlers import EXIT_OK, handle_cli_exception

# Command handlers
from gsgw.cli.commands import (
    solve,
    baseline,
    mesh_match,
    interpolate,
    bench,
    amortized,
    toy,
)

logger = get_logger(__name__)

COMMANDS = {
    module.NAME: module
    for module in (solve, baseline, mesh_match, interpolate, bench, amortized, toy)
}
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


def build_parser() -> argparse.ArgumentParser:
    """Top-level parser; every subcommand takes --config, --seed, --out and --log-level."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="Run config in section.key = value format")
    common.add_argument("--seed", type=int, help="Run a single seed instead of run.seeds")
    common.add_argument("--out", type=Path, help="Output directory, overrides run.out")
    common.add_argument("--log-level", choices=LOG_LEVELS, type=str.upper, help="Overrides GSGW_LOG_LEVEL")

    parser = argparse.ArgumentParser(prog=settings.APP_NAME, description="Generalized sliced GW matching")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for module in COMMANDS.values():
        module.add_parser(subparsers, [common])
    return parser


def _command_name(args: argparse.Namespace) -> str:
    action = getattr(args, "action", None)
    return f"{args.command}_{action}" if action else args.command


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments, run the command and print one JSON record per seed.

    Returns:
        Process exit code: 0 ok, 2 config error, 3 numeric failure, 4 IO/parse error
    """
    args = build_parser().parse_args(argv)
    setup_logging(log_level=args.log_level or settings.LOG_LEVEL, log_file=settings.LOG_FILE)
    command = _command_name(args)
    try:
        ctx = build_context(command, args)
        records = COMMANDS[args.command].run(ctx, args)
    except Exception as exc:
        return handle_cli_exception(exc, command)
    for record in records:
        print(record.model_dump_json())
    logger.info(f"{command} finished with {len(records)} records", extra={"command": command})
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
