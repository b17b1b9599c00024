import logging

import pytest

from app.core import config, errors
from app.schemas.experiment import ExperimentConfig, TrainingMode


def test_config_defaults():
    assert config.PROJECT_NAME == "ot-purify"
    assert config.DEFAULT_EPSILON == pytest.approx(0.05)
    assert config.DEFAULT_GCE_Q == pytest.approx(0.7)
    assert config.LOGGING_LEVEL in (logging.INFO, logging.DEBUG)


def test_experiment_settings_file(tmp_path):
    path = tmp_path / "experiment.env"
    path.write_text("MODE=gce\nEPOCHS=7\n# comment\nNOISE_RATE=0.4\n")
    settings = config.load_experiment_settings(path, {"epochs": "3"})
    assert settings == {"mode": "gce", "epochs": "3", "noise_rate": "0.4"}
    experiment = ExperimentConfig(**settings)
    assert experiment.mode is TrainingMode.GCE
    assert experiment.epochs == 3


def test_experiment_settings_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        config.load_experiment_settings(tmp_path / "nope.env")


def test_experiment_config_parsing():
    experiment = ExperimentConfig(seeds="3,1", log_domain="auto", shots="16")
    assert experiment.seeds == (3, 1)
    assert experiment.log_domain is None
    assert experiment.sinkhorn.epsilon == experiment.epsilon
    with pytest.raises(ValueError):
        ExperimentConfig(seeds="")
    with pytest.raises(ValueError):
        ExperimentConfig(unknown_key=1)


def test_custom_exceptions():
    with pytest.raises(ValueError):
        raise errors.NoiseSpecError("rate")
    with pytest.raises(errors.PurifyError):
        raise errors.ChecksumMismatchError("digest")
    divergence = errors.DivergenceError("loss is nan", 4)
    assert divergence.iteration == 4
    assert "iteration 4" in str(divergence)
    truncated = errors.TruncatedPayloadError(16, 8)
    assert isinstance(truncated, errors.EmbeddingFormatError)
    assert (truncated.expected, truncated.actual) == (16, 8)
