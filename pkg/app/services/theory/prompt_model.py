"""Synthetic binary prompt-learning model: ReLU text encoder, aligned image features.

Binary labels map to class indices +1 -> 0 and -1 -> 1 wherever a probability
vector is formed.
"""
from typing import Literal, Sequence

import numpy as np
from scipy.special import log_softmax
from scipy.special import softmax as _softmax

from app.core.errors import EmptyDatasetError, InvalidInputError
from app.schemas.losses import ProbVector
from app.schemas.theory import FeatureBasis, PromptModel, SyntheticSample, TheoryConfig

LossName = Literal["ce", "mae"]


def _relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def _step(x: np.ndarray) -> np.ndarray:
    # subgradient of ReLU at 0 taken as 0
    return (x > 0.0).astype(np.float64)


def class_index(label: int) -> int:
    return 0 if label == 1 else 1


# ============================================================================
# Construction
# ============================================================================

def build_feature_basis(m: int, L: int, rng: np.random.Generator,
                        mu_norm: float = 1.0, xi_norm: float = 1.0) -> FeatureBasis:
    """Random orthogonal mu, xi_1..xi_L in R^m from the QR of a Gaussian matrix."""
    if m < L + 1:
        raise InvalidInputError(f"cannot fit {L + 1} orthogonal directions in R^{m}")
    q, _ = np.linalg.qr(rng.standard_normal((m, L + 1)))
    rows = q.T
    return FeatureBasis(mu=mu_norm * rows[0], xis=xi_norm * rows[1:])


def build_prompt_model(basis: FeatureBasis, config: TheoryConfig,
                       rng: np.random.Generator) -> PromptModel:
    """Class prompts +-kappa mu/|mu|^2 plus random irrelevant parts.

    The learnable prompt is drawn from N(0, sigma_0^2 I).
    """
    mu_unit = basis.mu / float(basis.mu @ basis.mu)
    xi_units = basis.xis / np.sum(basis.xis**2, axis=1, keepdims=True)
    z_plus = config.class_prompt_scale * rng.standard_normal(basis.L)
    z_minus = config.class_prompt_scale * rng.standard_normal(basis.L)
    p_plus = config.class_margin * mu_unit + z_plus @ xi_units
    p_minus = -config.class_margin * mu_unit + z_minus @ xi_units
    p0 = config.sigma_0 * rng.standard_normal(basis.m)
    return PromptModel(basis=basis, p=p0, p_plus=p_plus, p_minus=p_minus,
                       sigma_p=config.sigma_p)


# ============================================================================
# Forward pass
# ============================================================================

def text_encode(model: PromptModel, label: int,
                p: np.ndarray | None = None) -> np.ndarray:
    """h_c = relu(Wp + Wp_c) - relu(-Wp + Wp_c); one entry per basis row."""
    if label not in (1, -1):
        raise InvalidInputError("class must be +1 or -1")
    p = model.p if p is None else p
    W = model.W
    a = W @ p
    b = W @ (model.p_plus if label == 1 else model.p_minus)
    return _relu(a + b) - _relu(-a + b)


def stack_samples(
    samples: Sequence[SyntheticSample],
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(G, y, y_tilde) arrays for a batch of samples."""
    if not samples:
        raise EmptyDatasetError("batch is empty")
    G = np.vstack([s.g for s in samples])
    y = np.array([s.y for s in samples], dtype=np.int64)
    y_tilde = np.array([s.y_tilde for s in samples], dtype=np.int64)
    return G, y, y_tilde


def similarities(model: PromptModel, G: np.ndarray,
                 p: np.ndarray | None = None) -> np.ndarray:
    """n x 2 matrix of (sim with h_+, sim with h_-)."""
    h_plus = text_encode(model, 1, p)
    h_minus = text_encode(model, -1, p)
    return np.column_stack([G @ h_plus, G @ h_minus])


def forward(model: PromptModel,
            sample: SyntheticSample) -> tuple[tuple[float, float], ProbVector]:
    sims = similarities(model, sample.g[None, :])[0]
    return (float(sims[0]), float(sims[1])), ProbVector(entries=_softmax(sims))


def _target_columns(y_tilde: np.ndarray) -> np.ndarray:
    return np.where(y_tilde == 1, 0, 1)


def batch_loss(model: PromptModel, samples: Sequence[SyntheticSample],
               loss_kind: LossName, p: np.ndarray | None = None) -> float:
    """Mean training loss against the observed labels."""
    G, _, y_tilde = stack_samples(samples)
    return mean_loss(model, G, y_tilde, loss_kind, p)


def mean_loss(model, G, y_tilde, loss_kind, p=None) -> float:
    log_s = log_softmax(similarities(model, G, p), axis=1)
    log_s_y = log_s[np.arange(G.shape[0]), _target_columns(y_tilde)]
    if loss_kind == "ce":
        return float(-np.mean(log_s_y))
    if loss_kind == "mae":
        return float(np.mean(2.0 * (1.0 - np.exp(log_s_y))))
    raise InvalidInputError(f"unknown loss kind {loss_kind!r}")


# ============================================================================
# Gradient
# ============================================================================

def sigma_prime(model: PromptModel, p: np.ndarray | None = None,
                literal: bool = False) -> np.ndarray:
    """Per-row activation factor, class +1 side minus class -1 side.

    Derivative form: [1(a + b_+) + 1(-a + b_+)] - [1(a + b_-) + 1(-a + b_-)] with
    a = w_r.p and b_c = w_r.p_c. With ``literal`` the indicators are replaced by
    the ReLU values themselves. The factor does not depend on the sample, and
    flipping the reference class only changes its sign.
    """
    p = model.p if p is None else p
    W = model.W
    a = W @ p
    b_plus = W @ model.p_plus
    b_minus = W @ model.p_minus
    f = _relu if literal else _step
    return (f(a + b_plus) + f(-a + b_plus)) - (f(a + b_minus) + f(-a + b_minus))


def _coefficients(s: np.ndarray, y_tilde: np.ndarray,
                  loss_kind: LossName) -> np.ndarray:
    cols = _target_columns(y_tilde)
    rows = np.arange(s.shape[0])
    s_y = s[rows, cols]
    s_other = s[rows, 1 - cols]
    if loss_kind == "ce":
        return s_other
    if loss_kind == "mae":
        return 2.0 * s_y * s_other
    raise InvalidInputError(f"unknown loss kind {loss_kind!r}")


def gradient_terms(model: PromptModel, G: np.ndarray, y_tilde: np.ndarray,
                   loss_kind: LossName, p: np.ndarray | None = None,
                   literal_sigma_prime: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample coefficients l'_i and the per-row factor sigma'_r."""
    s = _softmax(similarities(model, G, p), axis=1)
    coeffs = _coefficients(s, y_tilde, loss_kind)
    return coeffs, sigma_prime(model, p, literal_sigma_prime)


def prompt_gradient(model, G, y_tilde, loss_kind, p=None,
                    literal_sigma_prime=False) -> np.ndarray:
    coeffs, sig = gradient_terms(model, G, y_tilde, loss_kind, p, literal_sigma_prime)
    # -(1/n) sum_i l'_i y~_i sum_r g_{i,r} sigma'_r w_r
    row_weights = sig * (G.T @ (coeffs * y_tilde))
    return -(model.W.T @ row_weights) / G.shape[0]


def analytic_gradient(model: PromptModel, batch: Sequence[SyntheticSample],
                      loss_kind: LossName,
                      literal_sigma_prime: bool = False) -> np.ndarray:
    """Gradient of the mean batch loss with respect to the learnable prompt."""
    G, _, y_tilde = stack_samples(batch)
    return prompt_gradient(model, G, y_tilde, loss_kind,
                           literal_sigma_prime=literal_sigma_prime)


def kink_distance(model: PromptModel, p: np.ndarray | None = None) -> float:
    """Smallest |pre-activation| over both classes; zero means p sits on a kink."""
    p = model.p if p is None else p
    W = model.W
    a = W @ p
    pre = [a + W @ model.p_plus, -a + W @ model.p_plus,
           a + W @ model.p_minus, -a + W @ model.p_minus]
    return float(min(np.min(np.abs(x)) for x in pre))


def error_rate(model: PromptModel, G: np.ndarray, y: np.ndarray,
               p: np.ndarray | None = None) -> float:
    """Fraction misclassified by argmax of similarity; ties go to class +1."""
    sims = similarities(model, G, p)
    predicted = np.where(sims[:, 0] >= sims[:, 1], 1, -1)
    return float(np.mean(predicted != y))


def mean_target_probability(model: PromptModel, G: np.ndarray, y: np.ndarray,
                            p: np.ndarray | None = None) -> float:
    s = _softmax(similarities(model, G, p), axis=1)
    return float(np.mean(s[np.arange(G.shape[0]), _target_columns(y)]))
