"""Pydantic schemas for the optimal-transport solver."""
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.core.config import (
    DEFAULT_EPSILON,
    DEFAULT_MAX_ITERS,
    DEFAULT_TOLERANCE,
    LOG_DOMAIN_THRESHOLD,
)


class SinkhornConfig(BaseModel):
    """Entropic coefficient, stopping rule and numerical path of the solver."""
    model_config = ConfigDict(frozen=True)

    epsilon: float = Field(DEFAULT_EPSILON, gt=0)
    max_iters: int = Field(DEFAULT_MAX_ITERS, ge=1)
    tolerance: float = Field(DEFAULT_TOLERANCE, gt=0)
    # None means: decide from epsilon
    log_domain: Optional[bool] = None
    # anneal epsilon down from the cost range, warm-starting each stage; None: on in the
    # log domain below the threshold
    epsilon_scaling: Optional[bool] = None

    @property
    def use_log_domain(self) -> bool:
        if self.log_domain is None:
            return self.epsilon < LOG_DOMAIN_THRESHOLD
        return self.log_domain

    @property
    def use_epsilon_scaling(self) -> bool:
        if self.epsilon_scaling is None:
            return self.use_log_domain and self.epsilon < LOG_DOMAIN_THRESHOLD
        return self.epsilon_scaling


class CostMatrix(BaseModel):
    """C x N transport cost between classes (rows) and samples (columns)."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    entries: np.ndarray

    @field_validator("entries", mode="before")
    @classmethod
    def _finite(cls, value):
        array = np.array(value, dtype=np.float64, copy=True)
        if array.ndim != 2 or 0 in array.shape:
            raise ValueError(
                f"cost must be a non-empty 2-D matrix, got shape {array.shape}"
            )
        if not np.all(np.isfinite(array)):
            raise ValueError("cost matrix contains NaN or Inf")
        array.setflags(write=False)
        return array

    @property
    def C(self) -> int:  # noqa: N802
        return int(self.entries.shape[0])

    @property
    def N(self) -> int:  # noqa: N802
        return int(self.entries.shape[1])


class TransportPlan(BaseModel):
    """Nonnegative coupling with its marginals and the achieved violation."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    entries: np.ndarray
    row_marginal: np.ndarray
    col_marginal: np.ndarray
    residual: float = Field(..., ge=0)
    iterations: int = Field(0, ge=0)
    converged: bool = True

    @field_validator("entries", "row_marginal", "col_marginal", mode="before")
    @classmethod
    def _readonly(cls, value):
        array = np.array(value, dtype=np.float64, copy=True)
        array.setflags(write=False)
        return array

    @model_validator(mode="after")
    def _check_plan(self):
        C, N = self.entries.shape
        if self.row_marginal.shape != (C,) or self.col_marginal.shape != (N,):
            raise ValueError("marginal lengths do not match the plan shape")
        if np.any(self.entries < 0) or not np.all(np.isfinite(self.entries)):
            raise ValueError("transport plan must be finite and nonnegative")
        # small slack for the float sums themselves
        slack = self.residual + 1e-12
        if np.max(np.abs(self.entries.sum(axis=1) - self.row_marginal)) > slack:
            raise ValueError("row sums violate the recorded residual")
        if np.max(np.abs(self.entries.sum(axis=0) - self.col_marginal)) > slack:
            raise ValueError("column sums violate the recorded residual")
        if abs(self.entries.sum() - 1.0) > 1e-9 + self.residual * max(C, N):
            raise ValueError("transport plan does not carry unit mass")
        return self

    @property
    def C(self) -> int:  # noqa: N802
        return int(self.entries.shape[0])

    @property
    def N(self) -> int:  # noqa: N802
        return int(self.entries.shape[1])


class EpsilonScanPoint(BaseModel):
    epsilon: float
    objective: float
    residual: float
    converged: bool


class OracleComparison(BaseModel):
    """Entropic objective against the exact optimum on one instance."""
    n: int
    epsilon: float
    exact: float
    entropic: float
    converged: bool
    iterations: int = 0

    @property
    def gap(self) -> float:
        return abs(self.entropic - self.exact)


class ThroughputMeasurement(BaseModel):
    C: int
    N: int
    epsilon: float
    seconds: float
    iterations: int
    converged: bool
