"""Run manifests: what was run, on which data, and how to run it again."""
from io import StringIO
from pathlib import Path
from tempfile import TemporaryDirectory
from typing import Callable, Mapping, Optional

import pandas as pd
from pydantic import ValidationError

from app.core.config import MANIFEST_SCHEMA_VERSION, RNG_ALGORITHM, VERSION
from app.core.errors import ChecksumMismatchError, ReportError, UsageError
from app.core.logging import logger
from app.schemas.experiment import CSV_COLUMNS, DataFile, ExperimentConfig, RunManifest
from app.services.report_service import METRICS_CSV, metrics_csv_text
from app.services.storage import file_digest
from app.services.training.experiment_service import (
    DataSource,
    FileSource,
    execute,
    run_sweep,
    source_from_manifest,
)
from app.services.training.synthetic_service import SyntheticSource

MANIFEST_FILE = "manifest.json"
TIMING_COLUMNS = ("ot_seconds", "step_seconds")
TRAIN_COMMAND = "train"

# re-runs a recorded command into a scratch directory and returns the new manifest
Rerun = Callable[[RunManifest, Path], RunManifest]


def _digests(paths: Optional[Mapping[str, object]]) -> dict[str, DataFile]:
    files = {}
    for role, path in (paths or {}).items():
        try:
            files[role] = DataFile(path=str(path), digest=file_digest(path))
        except OSError as exc:
            raise ReportError(f"cannot read {role} file {path}: {exc}") from exc
    return files


def build_manifest(command: str, config: Optional[ExperimentConfig] = None,
                   source: Optional[DataSource] = None,
                   parameters: Optional[dict] = None,
                   inputs: Optional[Mapping[str, object]] = None,
                   outputs: Optional[Mapping[str, object]] = None,
                   arguments: Optional[dict] = None) -> RunManifest:
    data_files = source.data_files() if isinstance(source, FileSource) else {}
    data_files.update(_digests(inputs))
    synthetic = source.model_dump() if isinstance(source, SyntheticSource) else None
    return RunManifest(
        schema_version=MANIFEST_SCHEMA_VERSION,
        version=VERSION,
        rng_algorithm=RNG_ALGORITHM,
        command=command,
        config=config,
        seeds=config.seeds if config is not None else (),
        data_files=data_files,
        synthetic=synthetic,
        parameters=parameters or {},
        arguments=arguments or {},
        outputs=_digests(outputs),
    )


def write_manifest(out_dir, command: str, config: Optional[ExperimentConfig] = None,
                   source: Optional[DataSource] = None,
                   parameters: Optional[dict] = None,
                   inputs: Optional[Mapping[str, object]] = None,
                   outputs: Optional[Mapping[str, object]] = None,
                   arguments: Optional[dict] = None) -> Path:
    """Record a finished run under ``out_dir``.

    ``inputs`` and ``outputs`` map roles to files; both are stored with their digests.
    """
    manifest = build_manifest(command, config, source, parameters, inputs, outputs,
                              arguments)
    path = Path(out_dir) / MANIFEST_FILE
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(manifest.model_dump_json(indent=2) + "\n")
    except OSError as exc:
        raise ReportError(f"cannot write manifest {path}: {exc}") from exc
    logger.info(f"Wrote manifest {path}")
    return path


def read_manifest(out_dir) -> RunManifest:
    path = Path(out_dir) / MANIFEST_FILE
    try:
        return RunManifest.model_validate_json(path.read_text())
    except OSError as exc:
        raise ReportError(f"cannot read manifest {path}: {exc}") from exc
    except ValidationError as exc:
        raise UsageError(f"malformed manifest {path}: {exc}") from exc


def verify_data_files(manifest: RunManifest) -> None:
    for role, data_file in manifest.data_files.items():
        try:
            actual = file_digest(data_file.path)
        except OSError as exc:
            raise ReportError(
                f"cannot read {role} file {data_file.path}: {exc}"
            ) from exc
        if actual != data_file.digest:
            raise ChecksumMismatchError(
                f"{role} file {data_file.path} changed: "
                f"digest {actual} != {data_file.digest}"
            )


def outputs_match(recorded: RunManifest, replayed: RunManifest) -> bool:
    """Compare the files a run left on disk with the ones a replay produced."""
    if set(recorded.outputs) != set(replayed.outputs):
        logger.warning(f"Replay wrote {sorted(replayed.outputs)}, "
                       f"recorded {sorted(recorded.outputs)}")
        return False
    for role, output in recorded.outputs.items():
        try:
            on_disk = file_digest(output.path)
        except OSError as exc:
            raise ReportError(
                f"cannot read {role} output {output.path}: {exc}"
            ) from exc
        if on_disk != replayed.outputs[role].digest:
            logger.warning(f"{role} output {output.path} differs on replay")
            return False
    return True


def _same_metrics(recorded: str, replayed: str, compare_timings: bool) -> bool:
    if compare_timings:
        return recorded == replayed
    columns = [column for column in CSV_COLUMNS if column not in TIMING_COLUMNS]
    left = pd.read_csv(StringIO(recorded))[columns]
    right = pd.read_csv(StringIO(replayed))[columns]
    return left.equals(right)


def _replay_training(out_dir, manifest: RunManifest) -> bool:
    if manifest.config is None:
        raise UsageError(f"training manifest in {out_dir} has no config")
    source = source_from_manifest(manifest.data_files, manifest.synthetic)
    sweep = manifest.parameters.get("sweep")
    if sweep:
        records = run_sweep(manifest.config, sweep["noise_rates"],
                            manifest.config.seeds, sweep["modes"], source)
    else:
        records = execute(manifest.config, source)

    recorded_path = Path(out_dir) / METRICS_CSV
    try:
        recorded = recorded_path.read_text()
    except OSError as exc:
        raise ReportError(f"cannot read {recorded_path}: {exc}") from exc
    replayed = metrics_csv_text(records)
    return _same_metrics(recorded, replayed, manifest.config.timings == "off")


def replay_manifest(out_dir, rerun: Optional[Rerun] = None) -> bool:
    """Run a finished directory again from its manifest and compare the results.

    Training runs regenerate their metrics table: byte for byte with ``timings=off``,
    every column but the timings otherwise. Other commands are handed to ``rerun``,
    which writes into a scratch directory; every recorded output must come back with
    the same digest.
    """
    manifest = read_manifest(out_dir)
    verify_data_files(manifest)
    if manifest.command == TRAIN_COMMAND:
        matches = _replay_training(out_dir, manifest)
    else:
        if rerun is None:
            raise UsageError(
                f"runs of '{manifest.command}' need a command to re-run them"
            )
        if not manifest.outputs:
            raise UsageError(f"manifest in {out_dir} records no outputs to compare")
        with TemporaryDirectory(prefix="ot-purify-replay-") as scratch:
            matches = outputs_match(manifest, rerun(manifest, Path(scratch)))
    if matches:
        logger.info(
            f"Replay of {out_dir} reproduced the recorded {manifest.command} output"
        )
    else:
        logger.warning(f"Replay of {out_dir} differs from the recorded output")
    return matches
