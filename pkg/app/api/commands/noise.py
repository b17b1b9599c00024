"""``noise``: corrupt the observed labels of an embedding file."""
import argparse

import numpy as np

from app.api.commands.common import recorded_arguments
from app.schemas.noise import NoiseKind, NoiseSpec
from app.services.manifest_service import write_manifest
from app.services.noise_service import apply_noise
from app.services.storage import load_features, save_features

NAME = "noise"
OUTPUT_ARGUMENTS = ("out", "output")


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        NAME, help="inject label noise into an embedding file"
    )
    parser.add_argument("--input", required=True, metavar="PATH")
    parser.add_argument("--output", required=True, metavar="PATH")
    parser.add_argument("--kind", choices=[kind.value for kind in NoiseKind],
                        default=NoiseKind.SYMMETRIC.value)
    parser.add_argument("--rate", type=float, required=True)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--layout", choices=["packed", "sidecar"], default="packed")
    parser.add_argument("--out", default="runs/noise", help="manifest directory")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    spec = NoiseSpec(kind=args.kind, rate=args.rate, seed=args.seed)
    dataset = load_features(args.input)
    noisy = apply_noise(dataset, spec)
    save_features(args.output, noisy, args.layout)
    flipped = float(np.mean(noisy.observed_labels != dataset.observed_labels))
    write_manifest(args.out, NAME, parameters={"noise": spec.model_dump(mode="json"),
                                               "flipped_fraction": flipped},
                   inputs={"input": args.input}, outputs={"noisy": args.output},
                   arguments=recorded_arguments(args))
    print(f"flipped fraction: {flipped:.6g}")
    return 0
