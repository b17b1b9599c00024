"""Pydantic schemas for probability vectors and loss reports."""
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

SIMPLEX_TOLERANCE = 1e-9


class LossKind(str, Enum):
    CE = "ce"
    MAE = "mae"
    GCE = "gce"
    HARMONIZED = "harmonized"


class ProbVector(BaseModel):
    """A point of the probability simplex over C classes."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    entries: np.ndarray

    @field_validator("entries", mode="before")
    @classmethod
    def _on_simplex(cls, value):
        array = np.array(value, dtype=np.float64, copy=True)
        if array.ndim != 1 or array.size == 0:
            raise ValueError("probability vector must be a non-empty 1-D array")
        if np.any(array < 0) or not np.all(np.isfinite(array)):
            raise ValueError("probabilities must be finite and nonnegative")
        if abs(array.sum() - 1.0) > SIMPLEX_TOLERANCE:
            raise ValueError(f"probabilities sum to {array.sum():.12f}, not 1")
        array.setflags(write=False)
        return array

    def __len__(self) -> int:
        return int(self.entries.shape[0])

    def __getitem__(self, index: int) -> float:
        return float(self.entries[index])


class LossReport(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    total: float
    per_sample: np.ndarray
    kind: LossKind

    @field_validator("per_sample", mode="before")
    @classmethod
    def _finite(cls, value):
        array = np.array(value, dtype=np.float64, copy=True)
        if not np.all(np.isfinite(array)):
            raise ValueError("per-sample losses must be finite")
        array.setflags(write=False)
        return array

    @model_validator(mode="after")
    def _total_matches(self):
        if abs(self.total - float(self.per_sample.sum())) > 1e-9:
            raise ValueError("total does not equal the sum of per-sample losses")
        return self
