"""``replay``: run a finished output directory again and compare with its manifest."""
import argparse
from contextlib import redirect_stdout
from io import StringIO
from pathlib import Path

from app.api.commands import noise, oracle, purify, report, synth, theory
from app.core.errors import UsageError
from app.schemas.experiment import RunManifest
from app.services.manifest_service import read_manifest, replay_manifest

NAME = "replay"
RERUNNABLE = {
    command.NAME: command for command in (synth, noise, purify, theory, report, oracle)
}


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        NAME, help="re-run an output directory from its manifest"
    )
    parser.add_argument("directory", metavar="DIR")
    parser.set_defaults(handler=run)


def rerun(manifest: RunManifest, scratch: Path) -> RunManifest:
    """Run the recorded command again with its outputs redirected under ``scratch``."""
    command = RERUNNABLE.get(manifest.command)
    if command is None:
        raise UsageError(f"no command '{manifest.command}' to replay")
    if not manifest.arguments:
        raise UsageError(f"the {manifest.command} manifest records no arguments")
    arguments = dict(manifest.arguments)
    for key in command.OUTPUT_ARGUMENTS:
        arguments[key] = str(scratch / key / Path(arguments[key]).name)
    arguments.update(getattr(command, "REPLAY_OVERRIDES", {}))
    with redirect_stdout(StringIO()):
        command.run(argparse.Namespace(**arguments))
    return read_manifest(arguments["out"])


def replay_directory(directory) -> bool:
    return replay_manifest(directory, rerun=rerun)


def run(args: argparse.Namespace) -> int:
    identical = replay_directory(args.directory)
    print(f"replay of {args.directory}: {'identical' if identical else 'differs'}")
    return 0 if identical else 2
