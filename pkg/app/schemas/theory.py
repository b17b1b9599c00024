"""Pydantic schemas for the synthetic prompt-learning model."""
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

ORTHOGONALITY_TOLERANCE = 1e-9


def _readonly(value, ndim: int) -> np.ndarray:
    array = np.array(value, dtype=np.float64, copy=True)
    if array.ndim != ndim:
        raise ValueError(f"expected a {ndim}-D array, got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        raise ValueError("array contains NaN or Inf")
    array.setflags(write=False)
    return array


class FeatureBasis(BaseModel):
    """Task-relevant direction mu and task-irrelevant directions xi_1..xi_L."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    mu: np.ndarray
    xis: np.ndarray  # L x m, one direction per row

    @field_validator("mu", mode="before")
    @classmethod
    def _mu(cls, value):
        return _readonly(value, 1)

    @field_validator("xis", mode="before")
    @classmethod
    def _xis(cls, value):
        array = np.asarray(value, dtype=np.float64)
        if array.ndim == 1 and array.size == 0:
            array = array.reshape(0, 0)
        return _readonly(array, 2)

    @model_validator(mode="after")
    def _orthogonal(self):
        if self.L and self.xis.shape[1] != self.m:
            raise ValueError("xi directions must live in the same space as mu")
        W = self.rows
        norms = np.linalg.norm(W, axis=1)
        if np.any(norms == 0):
            raise ValueError("basis directions must be nonzero")
        gram = W @ W.T
        bound = ORTHOGONALITY_TOLERANCE * np.outer(norms, norms)
        off_diagonal = ~np.eye(W.shape[0], dtype=bool)
        if np.any(np.abs(gram[off_diagonal]) > bound[off_diagonal]):
            raise ValueError("basis directions must be pairwise orthogonal")
        return self

    @property
    def m(self) -> int:
        return int(self.mu.shape[0])

    @property
    def L(self) -> int:  # noqa: N802
        return int(self.xis.shape[0])

    @property
    def rows(self) -> np.ndarray:
        """W with rows (mu, xi_1, ..., xi_L)."""
        if self.L == 0:
            return self.mu[None, :]
        return np.vstack([self.mu[None, :], self.xis])


class PromptModel(BaseModel):
    """Frozen text encoder weights, fixed class prompts and the learnable prompt."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    basis: FeatureBasis
    p: np.ndarray
    p_plus: np.ndarray
    p_minus: np.ndarray
    sigma_p: float = Field(0.5, ge=0)
    activation: Literal["relu"] = "relu"

    @field_validator("p", "p_plus", "p_minus", mode="before")
    @classmethod
    def _vector(cls, value):
        return _readonly(value, 1)

    @model_validator(mode="after")
    def _separable(self):
        for name in ("p", "p_plus", "p_minus"):
            if getattr(self, name).shape[0] != self.basis.m:
                raise ValueError(f"{name} must have dimension {self.basis.m}")
        mu = self.basis.mu
        if float(mu @ self.p_plus) < 0 or float(mu @ self.p_minus) > 0:
            raise ValueError("class prompts must satisfy mu.p_plus >= 0 >= mu.p_minus")
        return self

    @property
    def W(self) -> np.ndarray:  # noqa: N802
        return self.basis.rows

    def with_prompt(self, p) -> "PromptModel":
        return self.model_copy(update={"p": _readonly(p, 1)})


class SyntheticSample(BaseModel):
    """Image feature g = (y, x_1..x_L) with its true and observed labels (both +-1)."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    y: Literal[-1, 1]
    g: np.ndarray
    y_tilde: Literal[-1, 1]

    @field_validator("g", mode="before")
    @classmethod
    def _g(cls, value):
        return _readonly(value, 1)

    @model_validator(mode="after")
    def _first_coordinate(self):
        if self.g[0] != self.y:
            raise ValueError("g[0] must equal the true label")
        return self


class TheoryConfig(BaseModel):
    """One gradient-descent run of the synthetic model.

    ``m`` is the ambient dimension of the feature directions and of the prompt;
    it must exceed L + 1 so the initial prompt keeps a component outside the basis.
    """
    model_config = ConfigDict(frozen=True)

    loss_kind: Literal["ce", "mae"] = "ce"
    n: int = Field(200, ge=1)
    n_test: int = Field(2000, ge=1)
    p_noise: float = Field(0.0, ge=0.0, le=0.5)
    sigma_p: float = Field(0.5, ge=0.0)
    m: int = Field(50, ge=2)
    L: int = Field(20, ge=0)
    eta: float = Field(0.01, gt=0)
    iters: int = Field(1500, ge=0)
    sigma_0: float = Field(0.01, ge=0.0)
    class_margin: float = Field(1.0, gt=0)
    class_prompt_scale: float = Field(2.0, ge=0.0)
    seed: int = Field(0, ge=0, lt=2**64)
    flip_all: bool = False

    @model_validator(mode="after")
    def _room_for_init(self):
        if self.m < self.L + 2:
            raise ValueError("m must be at least L + 2")
        return self


class TrajectoryRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    iteration: int
    alpha: float
    beta: float
    phi: tuple[float, ...]
    train_loss: float
    test_loss: float
    mean_s_y: float
    reconstruction_error: float


class PromptTrajectory(BaseModel):
    model_config = ConfigDict(frozen=True)

    config: TheoryConfig
    records: tuple[TrajectoryRecord, ...]
    monotone_train_loss: bool = True

    @model_validator(mode="after")
    def _reconstruction(self):
        for record in self.records:
            if record.reconstruction_error > 1e-6:
                raise ValueError(
                    f"decomposition drifted at iteration {record.iteration}: "
                    f"{record.reconstruction_error:.3e}"
                )
        return self

    @property
    def final(self) -> TrajectoryRecord:
        return self.records[-1]

    @property
    def snr(self) -> float:
        """beta / max_l |phi_l| at the final record."""
        final = self.final
        largest = max((abs(v) for v in final.phi), default=0.0)
        return float("inf") if largest == 0 else final.beta / largest


class SeedOutcome(BaseModel):
    model_config = ConfigDict(frozen=True)

    seed: int
    ce_error: float
    mae_error: float
    ce_snr: float
    mae_snr: float


class TheoremSuiteSummary(BaseModel):
    model_config = ConfigDict(frozen=True)

    outcomes: tuple[SeedOutcome, ...]
    mae_not_worse_fraction: float
    mae_snr_higher_fraction: float
    mean_ce_error: float
    mean_mae_error: float

    @property
    def holds(self) -> bool:
        return (self.mae_not_worse_fraction >= 0.9
                and self.mean_mae_error < self.mean_ce_error)


class RatioCell(BaseModel):
    model_config = ConfigDict(frozen=True)

    mean_s_y: float
    p_noise: float
    beta_ratio: float
    phi_ratio: float
    chain_holds: bool
