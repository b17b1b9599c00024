"""Pydantic schemas for clean/noisy partitions and their quality scores."""
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.schemas.features import frozen_labels


class PartitionResult(BaseModel):
    """Pseudo-labels with the induced clean and noisy index sets."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    pseudo_labels: np.ndarray
    clean_indices: np.ndarray
    noisy_indices: np.ndarray

    @field_validator("pseudo_labels", "clean_indices", "noisy_indices", mode="before")
    @classmethod
    def _as_int(cls, value):
        return frozen_labels(value)

    @model_validator(mode="after")
    def _covers_range(self):
        n = self.pseudo_labels.shape[0]
        merged = np.concatenate([self.clean_indices, self.noisy_indices])
        if merged.shape[0] != n or not np.array_equal(np.sort(merged), np.arange(n)):
            raise ValueError("clean and noisy indices must partition [0, N)")
        return self

    @property
    def size(self) -> int:
        return int(self.pseudo_labels.shape[0])

    @property
    def clean_mask(self) -> np.ndarray:
        mask = np.zeros(self.size, dtype=bool)
        mask[self.clean_indices] = True
        return mask

    @property
    def clean_fraction(self) -> float:
        return self.clean_indices.shape[0] / self.size if self.size else 0.0


class PurificationScore(BaseModel):
    """Binary clean-vs-noisy detection quality.

    ``confusion`` is [[TP, FN], [FP, TN]] with respect to ``positive``.
    """
    model_config = ConfigDict(frozen=True)

    accuracy: float = Field(..., ge=0.0, le=1.0)
    f1: float = Field(..., ge=0.0, le=1.0)
    confusion: tuple[tuple[int, int], tuple[int, int]]
    positive: Literal["clean", "noisy"] = "clean"

    @model_validator(mode="after")
    def _consistent(self):
        (tp, fn), (fp, tn) = self.confusion
        total = tp + fn + fp + tn
        if total and abs(self.accuracy - (tp + tn) / total) > 1e-12:
            raise ValueError("accuracy inconsistent with confusion counts")
        denominator = 2 * tp + fp + fn
        f1 = 2 * tp / denominator if denominator else 0.0
        if abs(self.f1 - f1) > 1e-12:
            raise ValueError("f1 inconsistent with confusion counts")
        return self
