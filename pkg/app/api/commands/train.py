"""``train``: prompt training runs, noise sweeps and manifest replay."""
import argparse

from app.api.commands.common import (
    add_data_flags,
    add_experiment_flags,
    data_source,
    experiment_config,
    parse_list,
)
from app.core.config import N_JOBS
from app.core.errors import UsageError
from app.schemas.experiment import TrainingMode
from app.api.commands.replay import replay_directory
from app.services.manifest_service import write_manifest
from app.services.report_service import emit_report
from app.services.training import execute, run_sweep

NAME = "train"
FORMATS = ("csv", "jsonl", "svg")


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        NAME, help="train prototypes with OT purification or a baseline"
    )
    add_experiment_flags(parser)
    add_data_flags(parser)
    parser.add_argument("--sweep", metavar="RATES",
                        help="comma-separated noise rates; "
                             "trains every rate x seed x mode")
    parser.add_argument("--modes", metavar="MODES",
                        help="comma-separated training modes for --sweep "
                             "(default: --mode)")
    parser.add_argument("--formats", default=",".join(FORMATS),
                        help="report formats; csv is always written")
    parser.add_argument("--jobs", type=int, default=N_JOBS)
    parser.add_argument("--replay", metavar="DIR",
                        help="re-run a finished output directory (any command)")
    parser.set_defaults(handler=run)


def _formats(text: str) -> list[str]:
    formats = parse_list(text, str)
    unknown = [fmt for fmt in formats if fmt not in FORMATS]
    if unknown:
        raise UsageError(f"unknown report formats {unknown}")
    return ["csv"] + [fmt for fmt in formats if fmt != "csv"]


def _modes(text: str) -> list[TrainingMode]:
    try:
        return [TrainingMode(mode) for mode in parse_list(text, str)]
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def run(args: argparse.Namespace) -> int:
    if args.replay:
        identical = replay_directory(args.replay)
        print(f"replay of {args.replay}: {'identical' if identical else 'differs'}")
        return 0 if identical else 2

    config = experiment_config(args)
    source = data_source(args)
    formats = _formats(args.formats)
    parameters = {}
    if args.sweep:
        rates = parse_list(args.sweep, float)
        modes = _modes(args.modes) if args.modes else [config.mode]
        records = run_sweep(config, rates, config.seeds, modes, source,
                            n_jobs=args.jobs)
        parameters["sweep"] = {"noise_rates": rates,
                               "modes": [mode.value for mode in modes]}
    else:
        records = execute(config, source, n_jobs=args.jobs)

    for fmt in formats:
        emit_report(records, fmt, config.output_dir)
    write_manifest(config.output_dir, NAME, config, source, parameters)

    finals = {}
    for record in records:
        finals[(record.mode.value, record.noise_rate, record.seed)] = record
    for (mode, noise, seed), record in finals.items():
        line = f"{mode} noise={noise:g} seed={seed}: test_acc {record.test_acc:.6g}"
        if record.purif_acc is not None:
            line += f", purif_acc {record.purif_acc:.6g}"
        print(line)
    return 0
