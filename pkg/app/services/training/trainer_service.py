"""Embedding-level prompt training.

The trainable object is the C x d prototype matrix, which stands in for the text
features a learnable prompt would produce. Each epoch optionally purifies the
dataset with OT, then runs mini-batch gradient steps with the loss chosen by the
training mode. Prototype rows are renormalized after every step.
"""
import math
from time import perf_counter
from typing import Optional

import numpy as np
from sklearn.metrics import accuracy_score

from app.core.errors import (
    DimensionMismatchError,
    DivergenceError,
    EmptyDatasetError,
    InvalidInputError,
)
from app.core.logging import logger
from app.schemas.experiment import ExperimentConfig, MetricsRecord, TrainingMode
from app.schemas.features import FeatureMatrix, LabeledDataset
from app.schemas.losses import LossKind
from app.schemas.partition import PartitionResult
from app.services.loss_service import batch_losses, logit_gradient, softmax_rows
from app.services.purification_service import (
    partition,
    pseudo_label_histogram,
    score_purification,
)
from app.services.transport import (
    pseudo_labels,
    solve_prompt_ot,
    solve_prompt_ot_batched,
)
from app.utils.rng import make_rng

SHUFFLE_STREAM = 11
INIT_STREAM = 12

DROP, CE, MAE, GCE = 0, 1, 2, 3
_KINDS = ((CE, LossKind.CE), (MAE, LossKind.MAE), (GCE, LossKind.GCE))
_BASELINES = (TrainingMode.CE_ONLY, TrainingMode.MAE_ONLY, TrainingMode.GCE)


def cosine_lr(base_lr: float, epoch: int, epochs: int) -> float:
    """Cosine-annealed rate for a 1-based epoch index."""
    if epochs <= 0:
        return base_lr
    return 0.5 * base_lr * (1.0 + math.cos(math.pi * (epoch - 1) / epochs))


def _initial_prototypes(prototypes: FeatureMatrix, config: ExperimentConfig,
                        seed: int) -> np.ndarray:
    if config.prototype_init == "random":
        raw = make_rng(seed, INIT_STREAM).standard_normal(prototypes.data.shape)
        return raw / np.linalg.norm(raw, axis=1, keepdims=True)
    return prototypes.normalize().data.copy()


def _assignment(mode: TrainingMode, result: Optional[PartitionResult],
                n: int) -> np.ndarray:
    """Per-sample loss code for this epoch."""
    if mode is TrainingMode.CE_ONLY:
        return np.full(n, CE)
    if mode is TrainingMode.MAE_ONLY:
        return np.full(n, MAE)
    if mode is TrainingMode.GCE:
        return np.full(n, GCE)
    clean = result.clean_mask
    if mode is TrainingMode.CLEAN_ONLY:
        return np.where(clean, CE, DROP)
    if mode is TrainingMode.NOISY_ONLY:
        return np.where(clean, DROP, MAE)
    return np.where(clean, CE, MAE)


def _purify(T: np.ndarray, features: FeatureMatrix, observed: np.ndarray,
            config: ExperimentConfig) -> tuple[PartitionResult, float]:
    text = FeatureMatrix(data=T, normalized=True)
    if config.partition_granularity == "batch":
        labels, plans = solve_prompt_ot_batched(
            text, features, config.sinkhorn, config.ot_temperature, config.batch_size
        )
        residual = max((plan.residual for plan in plans), default=0.0)
        converged = all(plan.converged for plan in plans)
    else:
        plan = solve_prompt_ot(text, features, config.sinkhorn, config.ot_temperature)
        labels, residual, converged = pseudo_labels(plan), plan.residual, plan.converged
    if not converged:
        logger.warning(
            f"OT partition used a non-converged plan (residual {residual:.3e})"
        )
    return partition(observed, labels), residual


def _batch_step(T: np.ndarray, X: np.ndarray, targets: np.ndarray, codes: np.ndarray,
                config: ExperimentConfig, lr: float) -> tuple[np.ndarray, float, int]:
    keep = codes != DROP
    if not keep.any():
        return T, 0.0, 0
    X, targets, codes = X[keep], targets[keep], codes[keep]
    probs = softmax_rows(config.logit_scale * (X @ T.T))
    losses = np.zeros(X.shape[0])
    grad_logits = np.zeros_like(probs)
    for code, kind in _KINDS:
        selected = codes == code
        if selected.any():
            losses[selected] = batch_losses(probs[selected], targets[selected], kind,
                                            q=config.gce_q, clamp=True)
            grad_logits[selected] = logit_gradient(probs[selected], targets[selected],
                                                   kind, q=config.gce_q)
    if lr > 0:
        grad = config.logit_scale * (grad_logits.T @ X) / X.shape[0]
        # tangent to the unit sphere of each prototype row
        grad -= np.sum(grad * T, axis=1, keepdims=True) * T
        T = T - lr * grad
        T = T / np.linalg.norm(T, axis=1, keepdims=True)
    return T, float(losses.sum()), int(X.shape[0])


def _accuracy(T: np.ndarray, features: np.ndarray, labels: np.ndarray) -> float:
    return float(accuracy_score(labels, np.argmax(features @ T.T, axis=1)))


def _check_inputs(dataset: LabeledDataset, prototypes: FeatureMatrix) -> None:
    if prototypes.rows != dataset.class_count:
        raise DimensionMismatchError(
            f"{prototypes.rows} prototypes for {dataset.class_count} classes"
        )
    if prototypes.dim != dataset.features.dim:
        raise DimensionMismatchError(
            f"prototype dim {prototypes.dim} != feature dim {dataset.features.dim}"
        )


def _train(dataset: LabeledDataset, prototypes: FeatureMatrix, config: ExperimentConfig,
           seed: int, test_set: Optional[LabeledDataset]) -> list[MetricsRecord]:
    _check_inputs(dataset, prototypes)
    if dataset.size == 0:
        raise EmptyDatasetError("training split is empty")
    if test_set is not None and test_set.size == 0:
        raise EmptyDatasetError(
            "test split is empty; raise the test fraction or class size"
        )
    features = dataset.features.normalize()
    X = features.data
    observed = dataset.observed_labels
    n = dataset.size
    if test_set is not None:
        eval_X = test_set.features.normalize().data
        eval_y = test_set.true_labels if test_set.true_labels is not None \
            else test_set.observed_labels
    else:
        eval_X = X
        eval_y = dataset.true_labels if dataset.true_labels is not None else observed

    T = _initial_prototypes(prototypes, config, seed)
    rng = make_rng(seed, SHUFFLE_STREAM)
    timed = config.timings == "wall"
    records: list[MetricsRecord] = []

    for epoch in range(1, config.epochs + 1):
        lr = cosine_lr(config.learning_rate, epoch, config.epochs)
        result, residual, ot_seconds = None, None, 0.0
        if config.mode.uses_partition:
            start = perf_counter()
            result, residual = _purify(T, features, observed, config)
            ot_seconds = perf_counter() - start
        codes = _assignment(config.mode, result, n)

        start = perf_counter()
        order = rng.permutation(n)
        total, used = 0.0, 0
        for offset in range(0, n, config.batch_size):
            batch = order[offset:offset + config.batch_size]
            T, batch_total, batch_used = _batch_step(T, X[batch], observed[batch],
                                                     codes[batch], config, lr)
            total += batch_total
            used += batch_used
        step_seconds = perf_counter() - start

        train_loss = total / used if used else 0.0
        if not (math.isfinite(train_loss) and np.all(np.isfinite(T))):
            for record in records:
                logger.error(record.model_dump_json())
            raise DivergenceError("training loss became non-finite", epoch)

        purif_acc = purif_f1 = None
        if result is not None and dataset.true_labels is not None:
            score = score_purification(result, dataset.true_labels, observed)
            purif_acc, purif_f1 = score.accuracy, score.f1

        record = MetricsRecord(
            epoch=epoch,
            mode=config.mode,
            noise_rate=config.noise_rate,
            seed=seed,
            train_loss=train_loss,
            test_acc=_accuracy(T, eval_X, eval_y),
            purif_acc=purif_acc,
            purif_f1=purif_f1,
            ot_seconds=ot_seconds if timed else 0.0,
            step_seconds=step_seconds if timed else 0.0,
            clean_fraction=None if result is None else result.clean_fraction,
            ot_residual=residual,
            pseudo_histogram=() if result is None else tuple(
                int(v) for v in pseudo_label_histogram(result.pseudo_labels,
                                                       dataset.class_count)),
        )
        records.append(record)
        logger.info(
            f"[{config.mode.value} seed={seed} noise={config.noise_rate:g}] "
            f"epoch {epoch}/{config.epochs} loss={train_loss:.4f} "
            f"test_acc={record.test_acc:.4f}"
            + ("" if purif_acc is None else f" purif_acc={purif_acc:.4f}")
        )
    return records


def run_nlprompt(dataset: LabeledDataset, prototypes: FeatureMatrix,
                 config: ExperimentConfig, seed: Optional[int] = None,
                 test_set: Optional[LabeledDataset] = None) -> list[MetricsRecord]:
    """OT purification each epoch, then CE on the clean part and MAE on the noisy part.

    The clean_only and noisy_only modes drop one side of the partition instead.
    """
    if not config.mode.uses_partition:
        raise InvalidInputError(
            f"mode {config.mode.value} does not partition; use run_baseline"
        )
    seed = config.seeds[0] if seed is None else seed
    return _train(dataset, prototypes, config, seed, test_set)


def run_baseline(dataset: LabeledDataset, prototypes: FeatureMatrix,
                 config: ExperimentConfig, seed: Optional[int] = None,
                 test_set: Optional[LabeledDataset] = None) -> list[MetricsRecord]:
    """Single-loss training over all samples, no OT phase."""
    if config.mode not in _BASELINES:
        raise InvalidInputError(
            f"mode {config.mode.value} is not a single-loss baseline"
        )
    seed = config.seeds[0] if seed is None else seed
    return _train(dataset, prototypes, config, seed, test_set)


def run_experiment(dataset: LabeledDataset, prototypes: FeatureMatrix,
                   config: ExperimentConfig, seed: Optional[int] = None,
                   test_set: Optional[LabeledDataset] = None) -> list[MetricsRecord]:
    runner = run_nlprompt if config.mode.uses_partition else run_baseline
    return runner(dataset, prototypes, config, seed, test_set)
