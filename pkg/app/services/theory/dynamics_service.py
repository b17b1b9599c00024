"""Gradient-descent dynamics of the synthetic prompt model and its coefficients."""
from typing import Sequence

import numpy as np

from app.core.errors import (
    DegenerateBasisError,
    DivergenceError,
    EmptyDatasetError,
    NoiseSpecError,
    RatioDomainError,
)
from app.core.logging import logger
from app.schemas.theory import (
    FeatureBasis,
    PromptModel,
    PromptTrajectory,
    SyntheticSample,
    TheoryConfig,
    TrajectoryRecord,
)
from app.services.noise_service import rademacher_flip
from app.services.theory.prompt_model import (
    LossName,
    build_feature_basis,
    build_prompt_model,
    error_rate,
    gradient_terms,
    mean_loss,
    mean_target_probability,
    prompt_gradient,
    stack_samples,
)
from app.utils.rng import make_rng

DEGENERACY_TOLERANCE = 1e-12

# independent Philox substreams of one seed
SAMPLE_STREAM = 1
TEST_STREAM = 2
BASIS_STREAM = 3
PROMPT_STREAM = 4


# ============================================================================
# Data
# ============================================================================

def sample_dataset(n: int, p_noise: float, sigma_p: float, L: int, seed: int,
                   stream: int = SAMPLE_STREAM) -> list[SyntheticSample]:
    """Draw n samples g = (y, x_1..x_L) with y uniform on +-1.

    Observed labels are flipped with probability ``p_noise``.
    """
    if not 0.0 <= p_noise <= 0.5:
        raise NoiseSpecError(f"p_noise={p_noise} outside [0, 1/2]")
    rng = make_rng(seed, stream)
    y = np.where(rng.random(n) < 0.5, 1, -1)
    x = sigma_p * rng.standard_normal((n, L))
    y_tilde = rademacher_flip(y, p_noise, seed)
    return [
        SyntheticSample(y=int(y[i]), g=np.concatenate(([float(y[i])], x[i])),
                        y_tilde=int(y_tilde[i]))
        for i in range(n)
    ]


# ============================================================================
# Decomposition
# ============================================================================

def _residual_direction(p0: np.ndarray, basis: FeatureBasis) -> np.ndarray:
    W = basis.rows
    coefficients = (W @ p0) / np.sum(W**2, axis=1)
    r0 = p0 - coefficients @ W
    scale = max(1.0, float(np.linalg.norm(p0)))
    if float(np.linalg.norm(r0)) <= DEGENERACY_TOLERANCE * scale:
        raise DegenerateBasisError(
            "initial prompt lies in the span of the feature basis"
        )
    return r0


def decompose_prompt(p: np.ndarray, p0: np.ndarray,
                     basis: FeatureBasis) -> tuple[float, float, tuple[float, ...]]:
    """Write p = alpha p0 + beta mu/|mu|^2 + sum_l phi_l xi_l/|xi_l|^2.

    alpha is the coefficient along the part of p0 outside the basis span; then
    beta = <p, mu> - alpha <p0, mu> and phi_l = <p, xi_l> - alpha <p0, xi_l>.
    """
    p = np.asarray(p, dtype=np.float64)
    p0 = np.asarray(p0, dtype=np.float64)
    r0 = _residual_direction(p0, basis)
    alpha = float(p @ r0 / (r0 @ r0))
    beta = float(p @ basis.mu - alpha * (p0 @ basis.mu))
    phi = tuple(float(v) for v in (basis.xis @ p - alpha * (basis.xis @ p0)))
    return alpha, beta, phi


def reconstruct_prompt(alpha: float, beta: float, phi: Sequence[float],
                       p0: np.ndarray, basis: FeatureBasis) -> np.ndarray:
    mu_sq = float(basis.mu @ basis.mu)
    p = alpha * np.asarray(p0, dtype=np.float64) + beta * basis.mu / mu_sq
    if basis.L:
        xi_units = basis.xis / np.sum(basis.xis**2, axis=1, keepdims=True)
        p = p + np.asarray(phi, dtype=np.float64) @ xi_units
    return p


# ============================================================================
# Coefficient updates
# ============================================================================

def coefficient_update(model: PromptModel, batch: Sequence[SyntheticSample],
                       loss_kind: LossName,
                       eta: float) -> tuple[float, tuple[float, ...]]:
    """One-step change of beta and each phi_l implied by a full-batch gradient step.

    delta beta  = (eta/n) sum_i l'_i sigma'_0 y~_i y_i |mu|^2
    delta phi_l = (eta/n) sum_i l'_i sigma'_l y~_i x_{i,l} |xi_l|^2
    """
    G, y, y_tilde = stack_samples(batch)
    coeffs, sig = gradient_terms(model, G, y_tilde, loss_kind)
    n = G.shape[0]
    basis = model.basis
    mu_sq = float(basis.mu @ basis.mu)
    delta_beta = eta / n * float(np.sum(coeffs * sig[0] * y_tilde * y)) * mu_sq
    xi_sq = np.sum(basis.xis**2, axis=1)
    weighted = (coeffs * y_tilde) @ G[:, 1:]
    delta_phi = eta / n * sig[1:] * weighted * xi_sq
    return delta_beta, tuple(float(v) for v in delta_phi)


def expected_updates(mean_s_y: float, p_noise: float, mu_norm_sq: float, sigma_p: float,
                     d: int, eta: float) -> dict[str, float]:
    """Expected per-step increments of beta and phi under CE and MAE.

    Clean samples enter with weight 1 - p and the flipped ones with weight p;
    CE coefficients scale with 1/E[s_y] and 1/(1 - E[s_y]), MAE's are constant.
    """
    e = float(mean_s_y)
    p = float(p_noise)
    if not 0.0 < e < 1.0:
        raise RatioDomainError("E[s_y] must lie strictly inside (0, 1)")
    noise_energy = sigma_p**2 * d
    return {
        "beta_ce": eta * ((1 - p) / e - p / (1 - e)) * mu_norm_sq,
        "phi_ce": eta * ((1 - p) / e + p / (1 - e)) * noise_energy,
        "beta_mae": eta * 2.0 * (1 - 2 * p) * mu_norm_sq,
        "phi_mae": eta * 2.0 * noise_energy,
    }


def expected_update_ratios(mean_s_y: float, p_noise: float) -> tuple[float, float]:
    """Closed-form (beta_ratio, phi_ratio) and their comparison with 1/(2 E[s_y]).

    beta_ratio = (1/(2E)) (1 - p/(1-E)) / (1 - 2p)
    phi_ratio  = (1/(2E)) (1 - p (2E - 1)/(1 - E))
    Defined for E in (1/2, 1) and 0 <= p < min(1/2, 1 - E). A failure of the
    ordering beta_ratio > 1/(2E) > phi_ratio is logged, not raised.
    """
    e = float(mean_s_y)
    p = float(p_noise)
    if not 0.5 < e < 1.0:
        raise RatioDomainError(f"E[s_y]={e} outside (1/2, 1)")
    if not 0.0 <= p < 0.5:
        raise RatioDomainError(f"p={p} outside [0, 1/2)")
    if p >= 1.0 - e:
        raise RatioDomainError(
            f"p={p} >= 1 - E[s_y]={1.0 - e}; the beta ratio is not positive"
        )
    base = 1.0 / (2.0 * e)
    beta_ratio = base * (1.0 - p / (1.0 - e)) / (1.0 - 2.0 * p)
    phi_ratio = base * (1.0 - p * (2.0 * e - 1.0) / (1.0 - e))
    if not beta_ratio > base > phi_ratio:
        logger.warning(
            f"ratio ordering fails at E[s_y]={e:g}, p={p:g}: "
            f"beta_ratio={beta_ratio:.6g}, 1/(2E)={base:.6g}, phi_ratio={phi_ratio:.6g}"
        )
    return beta_ratio, phi_ratio


def chain_holds(mean_s_y: float, beta_ratio: float, phi_ratio: float) -> bool:
    base = 1.0 / (2.0 * mean_s_y)
    return beta_ratio > base > phi_ratio


# ============================================================================
# Training
# ============================================================================

def measure_test_loss(model: PromptModel, test_set: Sequence[SyntheticSample]) -> float:
    """Error rate of argmax-similarity prediction on clean labels."""
    if not test_set:
        raise EmptyDatasetError("test set is empty")
    G, y, _ = stack_samples(test_set)
    return error_rate(model, G, y)


def setup_run(config: TheoryConfig) -> tuple[PromptModel, list[SyntheticSample],
                                              list[SyntheticSample]]:
    """Model, training set and clean test set for one configuration."""
    basis = build_feature_basis(config.m, config.L, make_rng(config.seed, BASIS_STREAM))
    model = build_prompt_model(basis, config, make_rng(config.seed, PROMPT_STREAM))
    train = sample_dataset(config.n, config.p_noise, config.sigma_p, config.L,
                           config.seed)
    if config.flip_all:
        train = [s.model_copy(update={"y_tilde": -s.y}) for s in train]
    test = sample_dataset(config.n_test, 0.0, config.sigma_p, config.L, config.seed,
                          stream=TEST_STREAM)
    return model, train, test


def train_prompt(config: TheoryConfig,
                 literal_sigma_prime: bool = False) -> PromptTrajectory:
    """Full-batch gradient descent on the prompt, decomposing p after every step."""
    model, train, test = setup_run(config)
    G, y, y_tilde = stack_samples(train)
    G_test, y_test, _ = stack_samples(test)
    p0 = model.p.copy()
    basis = model.basis
    p = p0.copy()

    def record(iteration: int, p: np.ndarray, train_loss: float) -> TrajectoryRecord:
        alpha, beta, phi = decompose_prompt(p, p0, basis)
        rebuilt = reconstruct_prompt(alpha, beta, phi, p0, basis)
        scale = max(1.0, float(np.linalg.norm(p)))
        return TrajectoryRecord(
            iteration=iteration, alpha=alpha, beta=beta, phi=phi,
            train_loss=train_loss,
            test_loss=error_rate(model, G_test, y_test, p),
            mean_s_y=mean_target_probability(model, G, y, p),
            reconstruction_error=float(np.linalg.norm(p - rebuilt)) / scale,
        )

    loss = mean_loss(model, G, y_tilde, config.loss_kind, p)
    records = [record(0, p, loss)]
    monotone = True
    for iteration in range(1, config.iters + 1):
        grad = prompt_gradient(model, G, y_tilde, config.loss_kind, p,
                               literal_sigma_prime)
        p = p - config.eta * grad
        new_loss = mean_loss(model, G, y_tilde, config.loss_kind, p)
        if not np.isfinite(new_loss) or not np.all(np.isfinite(p)):
            raise DivergenceError("training loss became non-finite", iteration)
        if new_loss > loss + 1e-12:
            monotone = False
        loss = new_loss
        records.append(record(iteration, p, loss))

    if not monotone:
        logger.warning(f"{config.loss_kind} training loss was not monotone "
                       f"(seed {config.seed})")
    final = records[-1]
    logger.debug(
        f"{config.loss_kind} seed={config.seed}: beta={final.beta:.4g} "
        f"test_error={final.test_loss:.4f} after {config.iters} iterations"
    )
    return PromptTrajectory(config=config, records=tuple(records),
                            monotone_train_loss=monotone)
