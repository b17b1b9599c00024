"""Pydantic schemas for label-noise injection."""
from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, model_validator


class NoiseKind(str, Enum):
    """Supported label-noise models."""
    SYMMETRIC = "symmetric"
    ASYMMETRIC = "asymmetric"
    RADEMACHER = "rademacher"


class NoiseSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: NoiseKind = NoiseKind.SYMMETRIC
    rate: float = Field(0.0, ge=0.0, le=1.0)
    seed: int = Field(0, ge=0, lt=2**64)

    @model_validator(mode="after")
    def _rademacher_rate(self):
        if self.kind is NoiseKind.RADEMACHER and self.rate > 0.5:
            raise ValueError("rademacher noise requires rate <= 0.5")
        return self
