# nested_covar/cli/main.py
"""
covar command-line entry point.

Exit codes: 0 success, 2 configuration or domain error, 3 runtime
estimation failure, 4 unknown flag.
"""
import argparse
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from .. import __version__
from ..config import settings
from ..errors import EXIT_CONFIG, EXIT_RUNTIME, EXIT_UNKNOWN_FLAG, CovarError
from . import deps
from .commands import COMMANDS

logger = logging.getLogger(__name__)


class UsageError(Exception):
    def __init__(self, message: str, exit_code: int):
        super().__init__(message)
        self.exit_code = exit_code


class CovarArgumentParser(argparse.ArgumentParser):
    """Raises instead of exiting so unknown flags map to their own exit code"""

    def error(self, message: str):
        code = EXIT_UNKNOWN_FLAG if message.startswith("unrecognized arguments") else EXIT_CONFIG
        raise UsageError(f"{self.prog}: error: {message}", code)


def build_parser() -> argparse.ArgumentParser:
    parser = CovarArgumentParser(prog="covar", description=f"{settings.APP_NAME} {__version__}")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=CovarArgumentParser)
    parents = [deps.common_parser()]
    for command in COMMANDS:
        command.register(subparsers, parents)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return e.exit_code

    deps.configure_logging(args.verbose)
    deps.apply_runtime_flags(args)
    try:
        return args.handler(args)
    except CovarError as e:
        logger.debug("Command failed", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except ValidationError as e:
        print(f"error: invalid input: {e.errors()[0]['msg']}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as e:
        logger.exception(f"Unexpected failure in {args.command}: {e}")
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
