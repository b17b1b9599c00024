"""Desk-scale stand-in for aligned image/text encoders: clustered unit embeddings."""
import math
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.core.errors import InvalidInputError
from app.core.logging import logger
from app.schemas.features import FeatureMatrix, LabeledDataset, SyntheticEmbeddings
from app.utils.rng import make_rng

SYNTH_STREAM = 6
SPLIT_STREAM = 7


def _prototypes(C: int, dim: int,
                rng: np.random.Generator) -> tuple[np.ndarray, list[str]]:
    warnings = []
    if dim >= C:
        # orthonormal columns of a Gaussian matrix
        q, _ = np.linalg.qr(rng.standard_normal((dim, C)))
        return q.T, warnings
    message = f"dim={dim} < C={C}: prototypes cannot be near-orthogonal"
    logger.warning(message)
    warnings.append(message)
    raw = rng.standard_normal((C, dim))
    return raw / np.linalg.norm(raw, axis=1, keepdims=True), warnings


def make_synthetic_embeddings(C: int, n_per_class: int, dim: int,
                              cluster_tightness: float,
                              seed: int) -> SyntheticEmbeddings:
    """C unit prototypes and n_per_class samples around each.

    Each sample is normalize(prototype + noise / tightness) with noise ~ N(0, I/dim);
    an infinite tightness puts every sample on its prototype. Samples are shuffled.
    """
    if C < 1 or n_per_class < 1 or dim < 1:
        raise InvalidInputError("C, n_per_class and dim must be positive")
    if not cluster_tightness > 0:
        raise InvalidInputError("cluster_tightness must be positive")
    rng = make_rng(seed, SYNTH_STREAM)
    prototypes, warnings = _prototypes(C, dim, rng)

    labels = np.repeat(np.arange(C), n_per_class)
    spread = 0.0 if math.isinf(cluster_tightness) else 1.0 / cluster_tightness
    noise = rng.standard_normal((labels.shape[0], dim)) / math.sqrt(dim)
    samples = prototypes[labels] + spread * noise
    order = rng.permutation(labels.shape[0])

    dataset = LabeledDataset(
        features=FeatureMatrix.normalized_from(samples[order]),
        observed_labels=labels[order],
        true_labels=labels[order],
        class_count=C,
        rng_seed=seed,
    )
    logger.debug(
        f"Generated {dataset.size} synthetic embeddings ({C} classes, dim {dim})"
    )
    return SyntheticEmbeddings(dataset=dataset,
                               prototypes=FeatureMatrix.normalized_from(prototypes),
                               warnings=tuple(warnings))


def split_dataset(dataset: LabeledDataset, test_fraction: float,
                  seed: int) -> tuple[LabeledDataset, LabeledDataset]:
    """Stratified train/test split; each class keeps at least one training sample."""
    if not 0.0 < test_fraction < 1.0:
        raise InvalidInputError("test_fraction must lie in (0, 1)")
    rng = make_rng(seed, SPLIT_STREAM)
    labels = dataset.true_labels
    if labels is None:
        labels = dataset.observed_labels
    train_idx, test_idx = [], []
    for c in range(dataset.class_count):
        members = rng.permutation(np.flatnonzero(labels == c))
        cut = min(int(round(members.size * test_fraction)), max(members.size - 1, 0))
        test_idx.append(members[:cut])
        train_idx.append(members[cut:])
    return (dataset.subset(np.sort(np.concatenate(train_idx))),
            dataset.subset(np.sort(np.concatenate(test_idx))))


class SyntheticSource(BaseModel):
    """Parameters of a synthetic train/test pair; picklable, so it can feed a sweep."""
    model_config = ConfigDict(frozen=True)

    classes: int = Field(10, ge=2)
    per_class: int = Field(40, ge=2)
    dim: int = Field(64, ge=1)
    tightness: float = Field(8.0, gt=0, allow_inf_nan=False)
    test_fraction: float = Field(0.5, gt=0, lt=1)
    seed: int = Field(0, ge=0)

    def build(self, seed: Optional[int] = None
              ) -> tuple[LabeledDataset, FeatureMatrix, LabeledDataset]:
        seed = self.seed if seed is None else seed
        synthetic = make_synthetic_embeddings(self.classes, self.per_class, self.dim,
                                              self.tightness, seed)
        train, test = split_dataset(synthetic.dataset, self.test_fraction, seed)
        return train, synthetic.prototypes, test

    def __call__(self,
                 seed: int) -> tuple[LabeledDataset, FeatureMatrix, LabeledDataset]:
        # run seed s draws the data of seed self.seed + s
        return self.build(self.seed + seed)
