"""Classification losses, the harmonized CE/MAE loss and their gradient coefficients."""
from typing import Sequence, Union

import numpy as np
from scipy.special import softmax as _softmax

from app.core.config import DEFAULT_GCE_Q
from app.core.errors import InfiniteLossError, InvalidInputError, LengthMismatchError
from app.schemas.losses import LossKind, LossReport, ProbVector

CLAMP_FLOOR = 1e-12

Probs = Union[np.ndarray, Sequence[ProbVector]]


def _kind(kind) -> LossKind:
    return kind if isinstance(kind, LossKind) else LossKind(kind)


def _check_q(q: float) -> float:
    if not 0.0 < q <= 1.0:
        raise InvalidInputError(f"GCE exponent q={q} outside (0, 1]")
    return float(q)


def _as_matrix(probs: Probs) -> np.ndarray:
    if isinstance(probs, np.ndarray):
        matrix = np.asarray(probs, dtype=np.float64)
    else:
        matrix = np.array([s.entries for s in probs], dtype=np.float64)
    if matrix.ndim != 2:
        raise InvalidInputError("probabilities must form a B x C matrix")
    return matrix


def _pick(matrix: np.ndarray, targets) -> np.ndarray:
    targets = np.asarray(targets, dtype=np.int64)
    if targets.shape != (matrix.shape[0],):
        raise LengthMismatchError(
            f"{matrix.shape[0]} probability rows but {targets.shape[0]} targets"
        )
    return matrix[np.arange(matrix.shape[0]), targets]


# ============================================================================
# Probabilities
# ============================================================================

def softmax(logits) -> ProbVector:
    """Max-shifted softmax; adding a constant to every logit changes nothing."""
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise InvalidInputError("logits must be finite")
    return ProbVector(entries=_softmax(logits))


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax of a B x C logit matrix."""
    return _softmax(np.asarray(logits, dtype=np.float64), axis=1)


# ============================================================================
# Single-sample losses
# ============================================================================

def ce_loss(s: ProbVector, y: int, clamp: bool = False) -> float:
    s_y = s[y]
    if s_y == 0.0:
        if not clamp:
            raise InfiniteLossError(f"cross-entropy is infinite: s[{y}] == 0")
        s_y = CLAMP_FLOOR
    return float(-np.log(s_y))


def mae_loss(s: ProbVector, y: int) -> float:
    target = np.zeros(len(s))
    target[y] = 1.0
    return float(np.abs(target - s.entries).sum())


def gce_loss(s: ProbVector, y: int, q: float = DEFAULT_GCE_Q) -> float:
    q = _check_q(q)
    return float((1.0 - s[y] ** q) / q)


# ============================================================================
# Batches
# ============================================================================

def batch_losses(probs: Probs, targets, kind, q: float = DEFAULT_GCE_Q,
                 clamp: bool = False) -> np.ndarray:
    """Per-sample losses of one kind for a B x C probability matrix."""
    matrix = _as_matrix(probs)
    s_y = _pick(matrix, targets)
    kind = _kind(kind)
    if kind is LossKind.CE:
        if np.any(s_y == 0.0):
            if not clamp:
                raise InfiniteLossError(
                    "cross-entropy is infinite for a zero target probability"
                )
            s_y = np.maximum(s_y, CLAMP_FLOOR)
        return -np.log(s_y)
    if kind is LossKind.MAE:
        one_hot = np.zeros_like(matrix)
        one_hot[np.arange(matrix.shape[0]), np.asarray(targets, dtype=np.int64)] = 1.0
        return np.abs(one_hot - matrix).sum(axis=1)
    if kind is LossKind.GCE:
        q = _check_q(q)
        return (1.0 - s_y**q) / q
    raise InvalidInputError(
        "the harmonized loss needs a clean mask; use harmonized_loss"
    )


def harmonized_loss(probs: Probs, targets, clean_mask,
                    clamp: bool = False) -> LossReport:
    """CE on samples flagged clean, MAE on the rest; total is the plain sum."""
    matrix = _as_matrix(probs)
    clean_mask = np.asarray(clean_mask, dtype=bool)
    targets = np.asarray(targets, dtype=np.int64)
    if clean_mask.shape != (matrix.shape[0],) or targets.shape != (matrix.shape[0],):
        raise LengthMismatchError(
            "probabilities, targets and clean mask differ in length"
        )
    per_sample = np.zeros(matrix.shape[0])
    if clean_mask.any():
        per_sample[clean_mask] = batch_losses(
            matrix[clean_mask], targets[clean_mask], LossKind.CE, clamp=clamp
        )
    if (~clean_mask).any():
        per_sample[~clean_mask] = batch_losses(
            matrix[~clean_mask], targets[~clean_mask], LossKind.MAE
        )
    return LossReport(total=float(per_sample.sum()), per_sample=per_sample,
                      kind=LossKind.HARMONIZED)


# ============================================================================
# Derivatives
# ============================================================================

def loss_derivative(s_y, kind, q: float = DEFAULT_GCE_Q):
    """d loss / d s_y of each loss written as a function of the target probability."""
    s_y = np.asarray(s_y, dtype=np.float64)
    kind = _kind(kind)
    if kind is LossKind.CE:
        result = -1.0 / s_y
    elif kind is LossKind.MAE:
        result = np.full_like(s_y, -2.0)
    elif kind is LossKind.GCE:
        result = -(s_y ** (_check_q(q) - 1.0))
    else:
        raise InvalidInputError(f"no closed-form derivative for {kind.value}")
    return float(result) if result.ndim == 0 else result


def gradient_coefficient(s_y, kind, q: float = DEFAULT_GCE_Q):
    """Binary-case coefficient l' multiplying the feature-direction gradient.

    CE gives 1 - s_y, MAE gives 2 s_y (1 - s_y), GCE gives s_y^q (1 - s_y).
    """
    s_y = np.asarray(s_y, dtype=np.float64)
    if np.any((s_y <= 0.0) | (s_y >= 1.0)):
        raise InvalidInputError("gradient coefficient needs s_y strictly inside (0, 1)")
    kind = _kind(kind)
    s_other = 1.0 - s_y
    if kind is LossKind.CE:
        result = s_other
    elif kind is LossKind.MAE:
        result = 2.0 * s_y * s_other
    elif kind is LossKind.GCE:
        result = s_y ** _check_q(q) * s_other
    else:
        raise InvalidInputError(f"no gradient coefficient for {kind.value}")
    return float(result) if result.ndim == 0 else result


def logit_gradient(probs: np.ndarray, targets, kind,
                   q: float = DEFAULT_GCE_Q) -> np.ndarray:
    """d loss / d logits for each row: w (s - e_y) with w = -s_y dl/ds_y."""
    matrix = _as_matrix(probs)
    s_y = _pick(matrix, targets)
    kind = _kind(kind)
    if kind is LossKind.CE:
        weight = np.ones_like(s_y)
    elif kind is LossKind.MAE:
        weight = 2.0 * s_y
    elif kind is LossKind.GCE:
        weight = s_y ** _check_q(q)
    else:
        raise InvalidInputError(
            "use per-kind gradients and combine them with the clean mask"
        )
    residual = matrix.copy()
    residual[np.arange(matrix.shape[0]), np.asarray(targets, dtype=np.int64)] -= 1.0
    return weight[:, None] * residual
