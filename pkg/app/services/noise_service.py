"""Label-noise injection and few-shot subsampling.

All injectors share one convention: the first draw of the seeded stream is the
Bernoulli flip mask, so ``draw_flip_mask`` reproduces exactly which items an
injector touched.
"""
import numpy as np

from app.core.errors import EmptyDatasetError, InvalidInputError, NoiseSpecError
from app.core.logging import logger
from app.schemas.features import LabeledDataset
from app.schemas.noise import NoiseKind, NoiseSpec
from app.utils.rng import make_rng


def _check_rate(rate: float) -> float:
    rate = float(rate)
    if not 0.0 <= rate <= 1.0:
        raise NoiseSpecError(f"noise rate {rate} outside [0, 1]")
    return rate


def _check_labels(labels, C: int) -> np.ndarray:
    if C < 2:
        raise NoiseSpecError(f"label noise needs at least two classes, got C={C}")
    labels = np.asarray(labels, dtype=np.int64)
    if labels.ndim != 1:
        raise InvalidInputError("labels must be a 1-D vector")
    if labels.size and (labels.min() < 0 or labels.max() >= C):
        raise InvalidInputError(f"labels outside [0, {C})")
    return labels


def _flip_mask(rng: np.random.Generator, n: int, rate: float) -> np.ndarray:
    return rng.random(n) < rate


def draw_flip_mask(n: int, rate: float, seed: int) -> np.ndarray:
    """Which of ``n`` items an injector with this (rate, seed) flips."""
    return _flip_mask(make_rng(seed), n, _check_rate(rate))


def inject_symmetric(labels, C: int, rate: float, seed: int) -> np.ndarray:
    """Flip each label with probability ``rate`` to a uniformly drawn other class."""
    labels = _check_labels(labels, C)
    rng = make_rng(seed)
    mask = _flip_mask(rng, labels.shape[0], _check_rate(rate))
    noisy = labels.copy()
    # an offset in [1, C) never lands on the original class
    offsets = rng.integers(1, C, size=int(mask.sum()))
    noisy[mask] = (labels[mask] + offsets) % C
    return noisy


def inject_asymmetric(labels, C: int, rate: float, seed: int) -> np.ndarray:
    """Flip each label with probability ``rate`` to its successor (label + 1) mod C."""
    labels = _check_labels(labels, C)
    mask = draw_flip_mask(labels.shape[0], rate, seed)
    noisy = labels.copy()
    noisy[mask] = (labels[mask] + 1) % C
    return noisy


def rademacher_flip(labels, p: float, seed: int) -> np.ndarray:
    """Flip the sign of each +-1 label independently with probability p <= 1/2."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and not np.all(np.abs(labels) == 1):
        raise InvalidInputError("rademacher noise needs labels in {-1, +1}")
    if float(p) > 0.5:
        raise NoiseSpecError(f"rademacher flip probability {p} exceeds 1/2")
    mask = draw_flip_mask(labels.shape[0], p, seed)
    return np.where(mask, -labels, labels)


def few_shot_sample(dataset: LabeledDataset, shots: int, seed: int) -> LabeledDataset:
    """Per class, min(shots, class size) items drawn without replacement.

    Classes are taken from the observed labels. The result is ordered by
    (class, original index).
    """
    if dataset.size == 0:
        raise EmptyDatasetError("cannot sample shots from an empty dataset")
    if shots < 1:
        raise InvalidInputError("shots must be positive")
    rng = make_rng(seed)
    chosen = []
    for c in range(dataset.class_count):
        members = np.flatnonzero(dataset.observed_labels == c)
        if members.size > shots:
            members = np.sort(rng.choice(members, size=shots, replace=False))
        elif members.size and members.size < shots:
            logger.debug(f"class {c} has {members.size} < {shots} samples; taking all")
        chosen.append(members)
    return dataset.subset(np.concatenate(chosen))


def apply_noise(dataset: LabeledDataset, spec: NoiseSpec) -> LabeledDataset:
    """Rewrite observed labels according to ``spec``; features and true labels stay."""
    observed = dataset.observed_labels
    C = dataset.class_count
    if spec.kind is NoiseKind.SYMMETRIC:
        noisy = inject_symmetric(observed, C, spec.rate, spec.seed)
    elif spec.kind is NoiseKind.ASYMMETRIC:
        noisy = inject_asymmetric(observed, C, spec.rate, spec.seed)
    else:
        if C != 2:
            raise NoiseSpecError(f"rademacher noise needs C=2, got C={C}")
        # class index 0 <-> +1, 1 <-> -1
        signs = np.where(observed == 0, 1, -1)
        flipped = rademacher_flip(signs, spec.rate, spec.seed)
        noisy = np.where(flipped == 1, 0, 1)
    flipped_fraction = float(np.mean(noisy != observed)) if observed.size else 0.0
    logger.info(
        f"Applied {spec.kind.value} noise at rate {spec.rate:g} (seed {spec.seed}): "
        f"{flipped_fraction:.3f} of labels changed"
    )
    return dataset.with_observed(noisy, rng_seed=spec.seed)
