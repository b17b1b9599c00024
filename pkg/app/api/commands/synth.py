"""``synth``: write a synthetic train/test/prototype triple."""
import argparse
from pathlib import Path

from app.api.commands.common import (
    add_synthetic_flags,
    recorded_arguments,
    synthetic_source,
)
from app.services.manifest_service import write_manifest
from app.services.storage import save_features, save_matrix

NAME = "synth"
OUTPUT_ARGUMENTS = ("out",)


def register(subparsers) -> None:
    parser = subparsers.add_parser(NAME, help="generate clustered synthetic embeddings")
    add_synthetic_flags(parser)
    parser.add_argument("--layout", choices=["packed", "sidecar"], default="packed")
    parser.add_argument("--out", default="runs/synth", help="output directory")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    source = synthetic_source(args)
    train, prototypes, test = source.build()
    out = Path(args.out)
    files = {"train": out / "train.emb", "test": out / "test.emb",
             "prototypes": out / "prototypes.emb"}
    save_features(files["train"], train, args.layout)
    save_features(files["test"], test, args.layout)
    save_matrix(files["prototypes"], prototypes, args.layout)
    write_manifest(out, NAME, source=source, parameters={"layout": args.layout},
                   outputs=files, arguments=recorded_arguments(args))
    for role, path in files.items():
        print(f"{role}: {path}")
    return 0
