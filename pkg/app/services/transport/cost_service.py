"""Cost matrices between class prototypes and sample embeddings."""
import numpy as np
from scipy.special import log_softmax

from app.core.errors import (
    DimensionMismatchError,
    InvalidInputError,
    NotNormalizedError,
)
from app.schemas.features import FeatureMatrix
from app.schemas.transport import CostMatrix


def _check_pair(prototypes: FeatureMatrix, samples: FeatureMatrix) -> None:
    if prototypes.dim != samples.dim:
        raise DimensionMismatchError(
            f"prototype dim {prototypes.dim} != sample dim {samples.dim}"
        )
    if not (prototypes.normalized and samples.normalized):
        raise NotNormalizedError("prototypes and samples must be row-normalized")


def similarity_matrix(prototypes: FeatureMatrix, samples: FeatureMatrix) -> np.ndarray:
    """Cosine similarities T I^T, shape C x N."""
    if prototypes.dim != samples.dim:
        raise DimensionMismatchError(
            f"prototype dim {prototypes.dim} != sample dim {samples.dim}"
        )
    return prototypes.data @ samples.data.T


def build_cost_matrix(
    prototypes: FeatureMatrix, samples: FeatureMatrix, temperature: float = 1.0
) -> CostMatrix:
    """Cost -log p, with p the per-sample class softmax of similarity / temperature.

    Raw cosines may be nonpositive, so the log is taken of softmax probabilities;
    the per-column ranking of classes is unchanged.
    """
    _check_pair(prototypes, samples)
    if not temperature > 0:
        raise InvalidInputError("temperature must be positive")
    logits = similarity_matrix(prototypes, samples) / temperature
    cost = -log_softmax(logits, axis=0)
    # -log of a probability is >= 0; clip the -0.0 / 1e-17 rounding noise
    return CostMatrix(entries=np.maximum(cost, 0.0))
