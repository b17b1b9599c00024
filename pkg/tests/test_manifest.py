"""Run manifests and replay."""
import json

import pytest

from app.core.errors import ChecksumMismatchError, UsageError
from app.schemas.experiment import ExperimentConfig, TrainingMode
from app.services.manifest_service import (
    MANIFEST_FILE,
    build_manifest,
    read_manifest,
    replay_manifest,
    write_manifest,
)
from app.services.report_service import emit_report
from app.services.storage import save_features, save_matrix
from app.services.training import FileSource, SyntheticSource, execute, run_sweep

SOURCE = SyntheticSource(classes=3, per_class=12, dim=8, test_fraction=0.25, seed=4)


def _rewrite(text):
    """A rerun that writes ``text`` as the comparisons table."""
    def rerun(manifest, scratch):
        table = scratch / "oracle.csv"
        table.write_text(text)
        return build_manifest(manifest.command, outputs={"comparisons": table})
    return rerun


def _finished_run(config, source, out):
    records = execute(config, source)
    emit_report(records, "csv", out)
    write_manifest(out, "train", config, source)
    return records


def test_manifest_records_run_identity(tmp_path, fast_config):
    """Versions, seeds and the synthetic recipe are written."""
    out = tmp_path / "run"
    write_manifest(out, "train", fast_config, SOURCE)
    manifest = read_manifest(out)
    assert manifest.schema_version == 2
    assert manifest.rng_algorithm == "numpy.random.Philox"
    assert manifest.seeds == (0,)
    assert manifest.config == fast_config
    assert manifest.synthetic["seed"] == 4
    assert manifest.data_files == {}


def test_replay_reproduces_metrics(tmp_path, fast_config):
    """With timings off a replay regenerates the identical table."""
    out = tmp_path / "run"
    _finished_run(fast_config.model_copy(update={"noise_rate": 0.3, "seeds": (0, 1)}),
                  SOURCE, out)
    assert replay_manifest(out)


def test_replay_ignores_wall_timings(tmp_path, fast_config):
    """Timing columns may differ between runs."""
    out = tmp_path / "run"
    _finished_run(fast_config.model_copy(update={"timings": "wall"}), SOURCE, out)
    assert replay_manifest(out)


def test_replay_detects_edited_metrics(tmp_path, fast_config):
    """A tampered metrics table no longer matches."""
    out = tmp_path / "run"
    _finished_run(fast_config, SOURCE, out)
    metrics = out / "metrics.csv"
    lines = metrics.read_text().splitlines()
    fields = lines[1].split(",")
    fields[5] = "0.123"
    lines[1] = ",".join(fields)
    metrics.write_text("\n".join(lines) + "\n")
    assert not replay_manifest(out)


def test_replay_of_a_sweep(tmp_path, fast_config):
    """Sweep parameters are stored and replayed."""
    out = tmp_path / "sweep"
    config = fast_config.model_copy(update={"epochs": 2})
    modes = [TrainingMode.NLPROMPT, TrainingMode.CE_ONLY]
    records = run_sweep(config, [0.0, 0.3], config.seeds, modes, SOURCE)
    emit_report(records, "csv", out)
    write_manifest(out, "train", config, SOURCE,
                   {"sweep": {"noise_rates": [0.0, 0.3],
                              "modes": [m.value for m in modes]}})
    assert replay_manifest(out)


def test_file_sources_are_checksummed(tmp_path, fast_config):
    """Editing an input file after the run blocks the replay."""
    train, prototypes, test = SOURCE.build()
    paths = {name: tmp_path / f"{name}.emb" for name in ("train", "prototypes", "test")}
    save_features(paths["train"], train)
    save_matrix(paths["prototypes"], prototypes)
    save_features(paths["test"], test)
    source = FileSource(train=str(paths["train"]), prototypes=str(paths["prototypes"]),
                        test=str(paths["test"]))
    out = tmp_path / "run"
    _finished_run(fast_config, source, out)
    assert set(read_manifest(out).data_files) == {"train", "prototypes", "test"}
    assert replay_manifest(out)

    save_features(paths["train"], train.with_observed((train.observed_labels + 1) % 3))
    with pytest.raises(ChecksumMismatchError):
        replay_manifest(out)


def test_other_commands_need_a_rerun(tmp_path):
    """Without a way to run the command again only training runs replay."""
    table = tmp_path / "oracle.csv"
    table.write_text("gap\n0\n")
    write_manifest(tmp_path, "oracle", outputs={"comparisons": table})
    with pytest.raises(UsageError):
        replay_manifest(tmp_path)


def test_manifest_without_outputs_cannot_replay(tmp_path):
    """Nothing recorded, nothing to compare."""
    write_manifest(tmp_path, "oracle", parameters={"instances": 3})
    with pytest.raises(UsageError):
        replay_manifest(tmp_path, rerun=_rewrite("gap\n0\n"))


@pytest.mark.parametrize("replayed,expected", [("gap\n0\n", True), ("gap\n1\n", False)])
def test_replay_compares_output_digests(tmp_path, replayed, expected):
    """A rerun matches when every recorded output comes back byte for byte."""
    out = tmp_path / "run"
    table = out / "oracle.csv"
    out.mkdir()
    table.write_text("gap\n0\n")
    write_manifest(out, "oracle", outputs={"comparisons": table},
                   arguments={"out": str(out)})
    assert read_manifest(out).outputs["comparisons"].path == str(table)
    assert replay_manifest(out, rerun=_rewrite(replayed)) is expected


def test_replay_reports_missing_roles(tmp_path):
    """A rerun that writes different outputs does not match."""
    table = tmp_path / "oracle.csv"
    table.write_text("gap\n0\n")
    write_manifest(tmp_path, "oracle", outputs={"comparisons": table})

    def rerun(manifest, scratch):
        other = scratch / "other.csv"
        other.write_text("gap\n0\n")
        return build_manifest("oracle", outputs={"other": other})

    assert not replay_manifest(tmp_path, rerun=rerun)


def test_timings_are_off_by_default():
    """Fresh configurations replay byte for byte."""
    assert ExperimentConfig().timings == "off"


def test_malformed_manifest(tmp_path):
    """A manifest missing required fields is a usage error."""
    (tmp_path / MANIFEST_FILE).write_text(json.dumps({"command": "train"}))
    with pytest.raises(UsageError):
        read_manifest(tmp_path)
