"""Clean/noisy dataset partitioning and purification scoring."""
from typing import Literal, Optional

import numpy as np
from sklearn.metrics import accuracy_score, confusion_matrix, f1_score

from app.core.errors import EmptyDatasetError, LengthMismatchError, MissingLabelsError
from app.schemas.features import FeatureMatrix
from app.schemas.partition import PartitionResult, PurificationScore
from app.schemas.transport import SinkhornConfig
from app.services.transport import (
    pseudo_labels,
    similarity_matrix,
    solve_prompt_ot,
    solve_prompt_ot_batched,
)


def partition(observed, pseudo) -> PartitionResult:
    """Clean where the observed label agrees with the pseudo-label, noisy elsewhere."""
    observed = np.asarray(observed, dtype=np.int64)
    pseudo = np.asarray(pseudo, dtype=np.int64)
    if observed.shape != pseudo.shape:
        raise LengthMismatchError(
            f"{observed.shape[0]} observed labels but {pseudo.shape[0]} pseudo-labels"
        )
    agree = observed == pseudo
    return PartitionResult(
        pseudo_labels=pseudo,
        clean_indices=np.flatnonzero(agree),
        noisy_indices=np.flatnonzero(~agree),
    )


def score_purification(
    result: PartitionResult,
    true_labels,
    observed,
    positive: Literal["clean", "noisy"] = "clean",
) -> PurificationScore:
    """Treat purification as binary detection of clean samples.

    Ground truth is ``observed == true_labels``; the prediction is membership of
    the clean set. ``positive`` selects which side F1 is computed for.
    """
    if true_labels is None:
        raise MissingLabelsError("purification scoring needs the hidden true labels")
    true_labels = np.asarray(true_labels, dtype=np.int64)
    observed = np.asarray(observed, dtype=np.int64)
    if not (true_labels.shape == observed.shape == (result.size,)):
        raise LengthMismatchError(
            "true labels, observed labels and partition differ in length"
        )
    if result.size == 0:
        raise EmptyDatasetError("cannot score an empty partition")

    actual_clean = observed == true_labels
    predicted_clean = result.clean_mask
    if positive == "clean":
        actual, predicted = actual_clean, predicted_clean
    else:
        actual, predicted = ~actual_clean, ~predicted_clean

    # rows/cols ordered (positive, negative) -> [[TP, FN], [FP, TN]]
    counts = confusion_matrix(actual, predicted, labels=[True, False])
    confusion = tuple(tuple(int(v) for v in row) for row in counts)
    accuracy = float(accuracy_score(actual, predicted))
    f1 = float(f1_score(actual, predicted, pos_label=True, zero_division=0.0))
    return PurificationScore(accuracy=accuracy, f1=f1, confusion=confusion,
                             positive=positive)


def zero_shot_partition(prototypes: FeatureMatrix, samples: FeatureMatrix,
                        observed) -> PartitionResult:
    """Pseudo-label each sample by its most similar prototype, without OT."""
    similarities = similarity_matrix(prototypes, samples)
    return partition(observed, np.argmax(similarities, axis=0))


def ot_partition(
    prototypes: FeatureMatrix,
    samples: FeatureMatrix,
    observed,
    config: Optional[SinkhornConfig] = None,
    temperature: float = 1.0,
    granularity: Literal["dataset", "batch"] = "dataset",
    batch_size: int = 32,
) -> PartitionResult:
    """Solve the prototype OT problem, decode pseudo-labels and split the dataset."""
    if granularity == "batch":
        labels, _ = solve_prompt_ot_batched(prototypes, samples, config, temperature,
                                            batch_size)
    else:
        plan = solve_prompt_ot(prototypes, samples, config, temperature)
        labels = pseudo_labels(plan)
    return partition(observed, labels)


def pseudo_label_histogram(labels, C: int) -> np.ndarray:
    """Count of samples assigned to each of C classes."""
    return np.bincount(np.asarray(labels, dtype=np.int64), minlength=C)[:C]
