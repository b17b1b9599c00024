"""``purify``: one OT partition of a noisy dataset, scored against zero-shot."""
import argparse
from pathlib import Path

import pandas as pd

from app.api.commands.common import add_data_flags, data_source, recorded_arguments
from app.core.config import DEFAULT_EPSILON, DEFAULT_MAX_ITERS
from app.schemas.noise import NoiseKind, NoiseSpec
from app.schemas.transport import SinkhornConfig
from app.services.manifest_service import write_manifest
from app.services.noise_service import apply_noise
from app.services.purification_service import (
    ot_partition,
    score_purification,
    zero_shot_partition,
)
from app.services.report_service import write_table

NAME = "purify"
OUTPUT_ARGUMENTS = ("out",)
RESULT_FILE = "purification.csv"


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        NAME, help="partition a dataset into clean and noisy parts"
    )
    add_data_flags(parser)
    parser.add_argument("--noise-kind", choices=[kind.value for kind in NoiseKind],
                        default=NoiseKind.SYMMETRIC.value)
    parser.add_argument("--noise-rate", type=float, default=0.0)
    parser.add_argument("--noise-seed", type=int, default=0)
    parser.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    parser.add_argument("--max-iters", type=int, default=DEFAULT_MAX_ITERS)
    parser.add_argument("--temperature", type=float, default=1.0)
    parser.add_argument("--granularity", choices=["dataset", "batch"],
                        default="dataset")
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--out", default="runs/purify", help="manifest directory")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    source = data_source(args)
    dataset, prototypes, _ = source.build()
    spec = NoiseSpec(kind=args.noise_kind, rate=args.noise_rate, seed=args.noise_seed)
    if spec.rate > 0:
        dataset = apply_noise(dataset, spec)
    solver = SinkhornConfig(epsilon=args.epsilon, max_iters=args.max_iters)
    features, prototypes = dataset.features.normalize(), prototypes.normalize()
    observed = dataset.observed_labels

    partitions = {
        "ot": ot_partition(prototypes, features, observed, solver, args.temperature,
                           args.granularity, args.batch_size),
        "zero-shot": zero_shot_partition(prototypes, features, observed),
    }
    rows = []
    for name, result in partitions.items():
        row = {"partition": name, "samples": len(observed),
               "clean": len(result.clean_indices), "noisy": len(result.noisy_indices),
               "clean_fraction": result.clean_fraction, "accuracy": None, "f1": None}
        line = f"{name}: clean fraction {result.clean_fraction:.6g}"
        if dataset.true_labels is not None:
            score = score_purification(result, dataset.true_labels, observed)
            row.update(accuracy=score.accuracy, f1=score.f1)
            line += f", purification accuracy {score.accuracy:.6g}, f1 {score.f1:.6g}"
        rows.append(row)
        print(line)
    table = write_table(pd.DataFrame(rows), Path(args.out) / RESULT_FILE)

    write_manifest(args.out, NAME, source=source, parameters={
        "noise": spec.model_dump(mode="json"),
        "sinkhorn": solver.model_dump(mode="json"),
        "temperature": args.temperature,
        "granularity": args.granularity,
        "batch_size": args.batch_size,
    }, outputs={"purification": table}, arguments=recorded_arguments(args))
    return 0
