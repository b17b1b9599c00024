"""Pydantic schemas for experiment configuration, metrics and run manifests."""
from enum import Enum
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.core.config import (
    DEFAULT_EPOCHS,
    DEFAULT_EPSILON,
    DEFAULT_LEARNING_RATE,
    DEFAULT_LOGIT_SCALE,
    DEFAULT_MAX_ITERS,
    DEFAULT_OT_TEMPERATURE,
    DEFAULT_TOLERANCE,
    DEFAULT_GCE_Q,
)
from app.schemas.noise import NoiseKind, NoiseSpec
from app.schemas.transport import SinkhornConfig


class TrainingMode(str, Enum):
    """Which samples are trained and with which loss."""
    NLPROMPT = "nlprompt"
    CE_ONLY = "ce_only"
    MAE_ONLY = "mae_only"
    GCE = "gce"
    # component ablations: keep only one side of the partition
    CLEAN_ONLY = "clean_only"
    NOISY_ONLY = "noisy_only"

    @property
    def uses_partition(self) -> bool:
        return self in (TrainingMode.NLPROMPT, TrainingMode.CLEAN_ONLY,
                        TrainingMode.NOISY_ONLY)


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    mode: TrainingMode = TrainingMode.NLPROMPT
    epochs: int = Field(DEFAULT_EPOCHS, ge=0)
    learning_rate: float = Field(DEFAULT_LEARNING_RATE, ge=0)
    logit_scale: float = Field(DEFAULT_LOGIT_SCALE, gt=0)
    ot_temperature: float = Field(DEFAULT_OT_TEMPERATURE, gt=0)
    epsilon: float = Field(DEFAULT_EPSILON, gt=0)
    max_iters: int = Field(DEFAULT_MAX_ITERS, ge=1)
    tolerance: float = Field(DEFAULT_TOLERANCE, gt=0)
    log_domain: Optional[bool] = None
    noise_kind: NoiseKind = NoiseKind.SYMMETRIC
    noise_rate: float = Field(0.0, ge=0, le=1)
    noise_seed: int = Field(0, ge=0)
    shots: Optional[int] = Field(None, ge=1)
    partition_granularity: Literal["dataset", "batch"] = "dataset"
    batch_size: int = Field(32, ge=1)
    gce_q: float = Field(DEFAULT_GCE_Q, gt=0, le=1)
    seeds: tuple[int, ...] = (0,)
    output_dir: str = "runs/latest"
    prototype_init: Literal["text", "random"] = "text"
    timings: Literal["wall", "off"] = "off"

    @field_validator("seeds", mode="before")
    @classmethod
    def _parse_seeds(cls, value):
        if isinstance(value, str):
            parts = value.replace(";", ",").split(",")
            value = [part for part in parts if part.strip()]
        seeds = tuple(int(seed) for seed in value)
        if not seeds or any(seed < 0 for seed in seeds):
            raise ValueError("seeds must be a non-empty list of nonnegative integers")
        return seeds

    @field_validator("log_domain", mode="before")
    @classmethod
    def _parse_auto(cls, value):
        if isinstance(value, str) and value.strip().lower() in ("", "auto", "none"):
            return None
        return value

    @property
    def sinkhorn(self) -> SinkhornConfig:
        return SinkhornConfig(epsilon=self.epsilon, max_iters=self.max_iters,
                              tolerance=self.tolerance, log_domain=self.log_domain)

    @property
    def noise(self) -> NoiseSpec:
        return NoiseSpec(kind=self.noise_kind, rate=self.noise_rate,
                         seed=self.noise_seed)


class MetricsRecord(BaseModel):
    """Per-epoch metrics of one training run."""
    model_config = ConfigDict(frozen=True)

    epoch: int = Field(..., ge=1)
    mode: TrainingMode
    noise_rate: float
    seed: int
    train_loss: float
    test_acc: float = Field(..., ge=0, le=1)
    purif_acc: Optional[float] = Field(None, ge=0, le=1)
    purif_f1: Optional[float] = Field(None, ge=0, le=1)
    ot_seconds: float = Field(0.0, ge=0)
    step_seconds: float = Field(0.0, ge=0)
    clean_fraction: Optional[float] = Field(None, ge=0, le=1)
    ot_residual: Optional[float] = None
    pseudo_histogram: tuple[int, ...] = ()


# CSV column order, fixed
CSV_COLUMNS = (
    "epoch", "mode", "noise_rate", "seed", "train_loss", "test_acc",
    "purif_acc", "purif_f1", "ot_seconds", "step_seconds",
)


class DataFile(BaseModel):
    path: str
    digest: str


class RunManifest(BaseModel):
    """Everything needed to replay a run directory."""
    schema_version: int
    version: str
    rng_algorithm: str
    command: str
    config: Optional[ExperimentConfig] = None
    seeds: tuple[int, ...] = ()
    data_files: dict[str, DataFile] = Field(default_factory=dict)  # keyed by role
    synthetic: Optional[dict] = None
    # command-specific parameters for runs without an ExperimentConfig
    parameters: dict = Field(default_factory=dict)
    # parsed command-line arguments; other commands replay by running them again
    arguments: dict = Field(default_factory=dict)
    # result files keyed by role
    outputs: dict[str, DataFile] = Field(default_factory=dict)
