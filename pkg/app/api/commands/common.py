"""Flags and helpers shared by the subcommands."""
import argparse
from typing import Callable, TypeVar

from app.core.config import load_experiment_settings
from app.core.errors import UsageError
from app.schemas.experiment import ExperimentConfig
from app.services.training import FileSource, SyntheticSource
from app.services.training.experiment_service import DataSource

T = TypeVar("T")

# keys accepted in the --config file and as flags (lower-case, dashes for underscores)
EXPERIMENT_KEYS = (
    "mode", "epochs", "learning_rate", "logit_scale", "ot_temperature", "epsilon",
    "max_iters", "tolerance", "log_domain", "noise_kind", "noise_rate", "noise_seed",
    "shots", "partition_granularity", "batch_size", "gce_q", "seeds", "output_dir",
    "prototype_init", "timings",
)


def flag(key: str) -> str:
    return "--" + key.replace("_", "-")


def parse_list(text: str, cast: Callable[[str], T]) -> list[T]:
    try:
        return [cast(part.strip()) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise UsageError(f"cannot parse list {text!r}: {exc}") from exc


def add_experiment_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group(
        "experiment", "flags override the keys of the --config file (KEY=VALUE lines)"
    )
    group.add_argument("--config", dest="config_file", metavar="PATH",
                       help="experiment key-value file")
    for key in EXPERIMENT_KEYS:
        group.add_argument(flag(key), dest=key, metavar=key.upper(), default=None)


def experiment_config(args: argparse.Namespace) -> ExperimentConfig:
    overrides = {key: getattr(args, key) for key in EXPERIMENT_KEYS
                 if getattr(args, key, None) is not None}
    try:
        settings = load_experiment_settings(args.config_file, overrides)
    except FileNotFoundError as exc:
        raise UsageError(str(exc)) from exc
    return ExperimentConfig(**settings)


def add_synthetic_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("synthetic data")
    group.add_argument("--classes", type=int, default=10)
    group.add_argument("--per-class", type=int, default=40)
    group.add_argument("--dim", type=int, default=64)
    group.add_argument("--tightness", type=float, default=8.0)
    group.add_argument("--test-fraction", type=float, default=0.5)
    group.add_argument("--data-seed", type=int, default=0)


def synthetic_source(args: argparse.Namespace) -> SyntheticSource:
    return SyntheticSource(classes=args.classes, per_class=args.per_class, dim=args.dim,
                           tightness=args.tightness, test_fraction=args.test_fraction,
                           seed=args.data_seed)


def add_data_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group(
        "embedding files", "synthetic data is used without --train"
    )
    group.add_argument("--train", metavar="PATH")
    group.add_argument("--prototypes", metavar="PATH")
    group.add_argument("--test", metavar="PATH")
    add_synthetic_flags(parser)


def data_source(args: argparse.Namespace) -> DataSource:
    if args.train is None:
        return synthetic_source(args)
    if args.prototypes is None:
        raise UsageError("--train needs --prototypes")
    return FileSource(train=args.train, prototypes=args.prototypes, test=args.test)


def recorded_arguments(args: argparse.Namespace) -> dict:
    """Parsed arguments as stored in a manifest; enough to run the command again."""
    return {key: value for key, value in vars(args).items() if key != "handler"}
