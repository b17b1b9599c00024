# Main command-line entry point
import argparse
import sys
from typing import Optional, Sequence

from pydantic import ValidationError

from app.api.commands import register_commands
from app.core.config import PROJECT_NAME, VERSION
from app.core.errors import PurifyError, UsageError
from app.core.logging import logger

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILURE = 2


class CommandParser(argparse.ArgumentParser):
    """Raises UsageError instead of exiting, so cli_main owns the exit code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def get_application() -> argparse.ArgumentParser:
    application = CommandParser(
        prog=PROJECT_NAME,
        description="Optimal-transport label purification for noisy prompt learning.",
    )
    application.add_argument("--version", action="version",
                             version=f"%(prog)s {VERSION}")
    subparsers = application.add_subparsers(dest="command", metavar="COMMAND")
    register_commands(subparsers)
    return application


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    application = get_application()
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv:
        application.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        args = application.parse_args(argv)
        if args.command is None:
            application.print_usage(sys.stderr)
            return EXIT_USAGE
        return args.handler(args)
    except SystemExit as exc:
        # --help and --version
        return exc.code if isinstance(exc.code, int) else EXIT_OK
    except (UsageError, ValidationError) as exc:
        logger.error(f"usage error: {exc}")
        return EXIT_USAGE
    except PurifyError as exc:
        logger.error(f"{type(exc).__name__}: {exc}")
        return EXIT_FAILURE


def main() -> None:
    sys.exit(cli_main())
