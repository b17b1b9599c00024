"""Pydantic schemas for embedding matrices and labelled datasets."""
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

NORM_TOLERANCE = 1e-9


def _frozen_array(value, dtype) -> np.ndarray:
    array = np.array(value, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


def frozen_labels(value) -> np.ndarray:
    """Copy a label vector into a read-only int64 array."""
    array = np.asarray(value)
    if array.ndim != 1:
        raise ValueError("label vector must be one-dimensional")
    if array.size and not np.all(np.equal(np.mod(array, 1), 0)):
        raise ValueError("labels must be integers")
    return _frozen_array(array, np.int64)


# ============================================================================
# Feature matrices
# ============================================================================

class FeatureMatrix(BaseModel):
    """Dense N x d matrix of embeddings; rows are samples or prototypes."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    data: np.ndarray
    normalized: bool = False

    @field_validator("data", mode="before")
    @classmethod
    def _as_matrix(cls, value):
        array = np.asarray(value, dtype=np.float64)
        if array.ndim != 2:
            raise ValueError(f"feature matrix must be 2-D, got shape {array.shape}")
        if not np.all(np.isfinite(array)):
            raise ValueError("feature matrix contains NaN or Inf")
        return _frozen_array(array, np.float64)

    @model_validator(mode="after")
    def _check_norms(self):
        if self.normalized and self.rows:
            norms = np.linalg.norm(self.data, axis=1)
            worst = float(np.max(np.abs(norms - 1.0)))
            if worst > NORM_TOLERANCE:
                raise ValueError(
                    f"rows flagged normalized but deviate from unit norm by {worst:.3e}"
                )
        return self

    @property
    def rows(self) -> int:
        return int(self.data.shape[0])

    @property
    def dim(self) -> int:
        return int(self.data.shape[1])

    @classmethod
    def normalized_from(cls, data) -> "FeatureMatrix":
        """L2-normalise the rows of ``data`` and flag the result as normalized."""
        array = np.asarray(data, dtype=np.float64)
        norms = np.linalg.norm(array, axis=1, keepdims=True)
        if np.any(norms == 0):
            raise ValueError("cannot normalise a zero row")
        return cls(data=array / norms, normalized=True)

    def normalize(self) -> "FeatureMatrix":
        if self.normalized:
            return self
        return FeatureMatrix.normalized_from(self.data)

    def take(self, indices) -> "FeatureMatrix":
        """Row subset; a subset of unit rows stays normalized."""
        return FeatureMatrix(data=self.data[np.asarray(indices, dtype=np.int64)],
                             normalized=self.normalized)


# ============================================================================
# Labelled datasets
# ============================================================================

class LabeledDataset(BaseModel):
    """Features with observed (possibly noisy) labels and optional hidden truth."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    features: FeatureMatrix
    observed_labels: np.ndarray
    true_labels: Optional[np.ndarray] = None
    class_count: int = Field(..., ge=1)
    rng_seed: int = Field(0, ge=0, lt=2**64)

    @field_validator("observed_labels", "true_labels", mode="before")
    @classmethod
    def _as_labels(cls, value):
        if value is None:
            return None
        return frozen_labels(value)

    @model_validator(mode="after")
    def _check_labels(self):
        n = self.features.rows
        for name, labels in (("observed_labels", self.observed_labels),
                             ("true_labels", self.true_labels)):
            if labels is None:
                continue
            if labels.shape[0] != n:
                raise ValueError(f"{name} has {labels.shape[0]} entries for {n} rows")
            if labels.size and (labels.min() < 0 or labels.max() >= self.class_count):
                raise ValueError(f"{name} outside [0, {self.class_count})")
        return self

    @property
    def size(self) -> int:
        return self.features.rows

    def subset(self, indices) -> "LabeledDataset":
        indices = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(
            features=self.features.take(indices),
            observed_labels=self.observed_labels[indices],
            true_labels=None if self.true_labels is None else self.true_labels[indices],
            class_count=self.class_count,
            rng_seed=self.rng_seed,
        )

    def with_observed(self, observed,
                      rng_seed: Optional[int] = None) -> "LabeledDataset":
        """Replace observed labels; features and true labels are carried verbatim."""
        true_labels = self.true_labels
        if true_labels is None:
            true_labels = self.observed_labels
        return LabeledDataset(
            features=self.features,
            observed_labels=observed,
            true_labels=true_labels,
            class_count=self.class_count,
            rng_seed=self.rng_seed if rng_seed is None else rng_seed,
        )


class SyntheticEmbeddings(BaseModel):
    """Output bundle of the synthetic embedding generator."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    dataset: LabeledDataset
    prototypes: FeatureMatrix
    warnings: tuple[str, ...] = ()


# ============================================================================
# On-disk header
# ============================================================================

class EmbeddingHeader(BaseModel):
    """Header of an embedding file, shared by the packed and JSON sidecar layouts."""
    count: int = Field(..., ge=0)
    dim: int = Field(..., ge=1)
    class_count: int = Field(0, ge=0)
    dtype: Literal["f4"] = "f4"
    endianness: Literal["<"] = "<"
    normalized: bool = False
    has_labels: bool = False
    has_true_labels: bool = False
    rng_seed: int = Field(0, ge=0, lt=2**64)
    digest: str = Field(..., pattern=r"^[0-9a-f]{16}$")

    @property
    def payload_bytes(self) -> int:
        return self.count * self.dim * 4
