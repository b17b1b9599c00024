"""Partitioning by pseudo-label agreement and purification scoring."""
import numpy as np
import pytest

from app.core.errors import LengthMismatchError, MissingLabelsError
from app.schemas.features import FeatureMatrix
from app.schemas.noise import NoiseKind, NoiseSpec
from app.schemas.partition import PartitionResult
from app.schemas.transport import SinkhornConfig
from app.services.noise_service import apply_noise
from app.services.purification_service import (
    ot_partition,
    partition,
    pseudo_label_histogram,
    score_purification,
    zero_shot_partition,
)


def test_partition_all_clean():
    """Full agreement leaves nothing noisy."""
    result = partition([0, 1, 2, 1], [0, 1, 2, 1])
    assert result.clean_indices.tolist() == [0, 1, 2, 3]
    assert result.noisy_indices.tolist() == []
    assert result.clean_fraction == 1.0


def test_partition_all_noisy():
    """Disjoint labels leave nothing clean."""
    result = partition([0, 0, 0], [1, 2, 1])
    assert result.clean_indices.size == 0
    assert result.noisy_indices.tolist() == [0, 1, 2]


def test_partition_mixed():
    """Pointwise comparison picks the clean positions."""
    result = partition([0, 1, 2], [0, 2, 2])
    assert result.clean_indices.tolist() == [0, 2]
    assert result.noisy_indices.tolist() == [1]


def test_partition_length_mismatch():
    """Observed and pseudo-labels must align."""
    with pytest.raises(LengthMismatchError):
        partition([0, 1], [0])


def test_partition_result_must_cover_range():
    """Overlapping index sets are invalid."""
    with pytest.raises(ValueError):
        PartitionResult(pseudo_labels=[0, 1], clean_indices=[0, 1], noisy_indices=[1])


def test_score_perfect_partition():
    """Predictions matching the hidden truth score 1."""
    observed = np.array([0, 1, 1, 2])
    true = np.array([0, 1, 2, 2])
    score = score_purification(partition(observed, true), true, observed)
    assert score.accuracy == 1.0
    assert score.f1 == 1.0
    assert score.confusion == ((3, 0), (0, 1))


def test_score_inverted_partition():
    """Calling every clean sample noisy and vice versa scores 0."""
    observed = np.array([0, 1, 1, 2])
    true = np.array([0, 1, 2, 2])
    pseudo = np.array([1, 0, 1, 0])
    score = score_purification(partition(observed, pseudo), true, observed)
    assert score.accuracy == 0.0
    assert score.f1 == 0.0


def test_score_trivial_all_clean_classifier():
    """Predicting all clean with 60% truly clean gives accuracy 0.6 and F1 0.75."""
    observed = np.zeros(10, dtype=int)
    true = np.array([0] * 6 + [1] * 4)
    score = score_purification(partition(observed, observed), true, observed)
    assert score.accuracy == pytest.approx(0.6)
    assert score.f1 == pytest.approx(0.75)


def test_score_noisy_positive():
    """With noisy as the positive class the trivial classifier finds nothing."""
    observed = np.zeros(10, dtype=int)
    true = np.array([0] * 6 + [1] * 4)
    score = score_purification(partition(observed, observed), true, observed,
                               positive="noisy")
    assert score.accuracy == pytest.approx(0.6)
    assert score.f1 == 0.0
    assert score.confusion == ((0, 4), (0, 6))


def test_score_needs_true_labels():
    """Without hidden labels there is nothing to score against."""
    with pytest.raises(MissingLabelsError):
        score_purification(partition([0, 1], [0, 1]), None, [0, 1])


def test_zero_shot_self_similarity(exact_clusters):
    """A sample equal to its prototype gets that prototype's class."""
    dataset = exact_clusters.dataset
    result = zero_shot_partition(exact_clusters.prototypes, dataset.features,
                                 dataset.observed_labels)
    assert np.array_equal(result.pseudo_labels, dataset.observed_labels)
    assert result.clean_fraction == 1.0


def test_zero_shot_tie_goes_to_lowest_class():
    """Equidistant prototypes resolve to the lower index."""
    prototypes = FeatureMatrix.normalized_from([[1.0, 0.0], [0.0, 1.0]])
    sample = FeatureMatrix.normalized_from([[1.0, 1.0]])
    assert zero_shot_partition(prototypes, sample, [1]).pseudo_labels.tolist() == [0]


def test_ot_balances_a_column_degenerate_instance():
    """Every sample is nearest class 0, yet OT spreads them across classes."""
    prototypes = FeatureMatrix.normalized_from(np.eye(3))
    rows = []
    for k in range(30):
        affinity = k % 3
        rows.append([1.0, 0.6 if affinity == 1 else 0.1, 0.6 if affinity == 2 else 0.1])
    samples = FeatureMatrix.normalized_from(rows)
    observed = np.arange(30) % 3
    zero_shot = zero_shot_partition(prototypes, samples, observed)
    assert pseudo_label_histogram(zero_shot.pseudo_labels, 3).tolist() == [30, 0, 0]

    config = SinkhornConfig(epsilon=0.01, log_domain=True)
    ot = ot_partition(prototypes, samples, observed, config, temperature=0.1)
    assert pseudo_label_histogram(ot.pseudo_labels, 3).tolist() == [10, 10, 10]
    assert np.array_equal(ot.pseudo_labels, observed)


def test_ot_recovers_noise_on_tight_clusters(synthetic):
    """On separated clusters the OT partition finds the flipped labels."""
    spec = NoiseSpec(kind=NoiseKind.SYMMETRIC, rate=0.3, seed=2)
    noisy = apply_noise(synthetic.dataset, spec)
    result = ot_partition(synthetic.prototypes, noisy.features, noisy.observed_labels)
    score = score_purification(result, noisy.true_labels, noisy.observed_labels)
    assert score.accuracy >= 0.95


def test_batched_partition_covers_every_sample(synthetic):
    """Batch granularity labels all samples in order."""
    dataset = synthetic.dataset
    result = ot_partition(synthetic.prototypes, dataset.features,
                          dataset.observed_labels, granularity="batch", batch_size=32)
    assert result.size == dataset.size
    assert result.clean_fraction > 0.9


def test_histogram_counts_every_class():
    """Absent classes count zero."""
    assert pseudo_label_histogram([0, 2, 2], 4).tolist() == [1, 0, 2, 0]
