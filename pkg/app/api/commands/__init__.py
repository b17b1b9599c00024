"""Subcommands; each module registers its parser on the shared application."""
from app.api.commands import noise, oracle, purify, report, synth, theory, train
from app.api.commands import replay

COMMANDS = (synth, noise, purify, train, theory, report, oracle, replay)


def register_commands(subparsers) -> None:
    for command in COMMANDS:
        command.register(subparsers)
