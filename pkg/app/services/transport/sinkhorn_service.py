"""Entropic optimal transport by Sinkhorn scaling, plus pseudo-label decoding."""
from typing import Iterable, Optional

import numpy as np
from scipy.special import logsumexp

from app.core.errors import InvalidInputError, MarginalError, SinkhornNumericalError
from app.core.logging import logger
from app.schemas.features import FeatureMatrix
from app.schemas.transport import (
    CostMatrix,
    EpsilonScanPoint,
    SinkhornConfig,
    TransportPlan,
)
from app.services.transport.cost_service import build_cost_matrix

SIMPLEX_TOLERANCE = 1e-9
# epsilon scaling: ratio between stages and the tolerance of the intermediate ones
SCALING_FACTOR = 4.0
STAGE_TOLERANCE = 1e-6


def _check_marginal(name: str, marginal, length: int) -> np.ndarray:
    marginal = np.asarray(marginal, dtype=np.float64)
    if marginal.shape != (length,):
        raise MarginalError(f"{name} has shape {marginal.shape}, expected ({length},)")
    if not np.all(np.isfinite(marginal)) or np.any(marginal <= 0):
        raise MarginalError(f"{name} must be strictly positive")
    if abs(marginal.sum() - 1.0) > SIMPLEX_TOLERANCE:
        raise MarginalError(f"{name} sums to {marginal.sum():.12f}, expected 1")
    return marginal


def _residual(plan: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    return float(max(np.max(np.abs(plan.sum(axis=1) - a)),
                     np.max(np.abs(plan.sum(axis=0) - b))))


def _scale_standard(M: np.ndarray, a: np.ndarray, b: np.ndarray,
                    config: SinkhornConfig):
    """Scaling on the Gibbs kernel K = exp(-M / eps)."""
    K = np.exp(-M / config.epsilon)
    u = np.ones_like(a)
    v = np.ones_like(b)
    Kv = K @ v
    iteration = 0
    for iteration in range(1, config.max_iters + 1):
        u = a / Kv
        v = b / (K.T @ u)
        Kv = K @ v
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise SinkhornNumericalError(
                f"non-finite scaling at iteration {iteration} with epsilon="
                f"{config.epsilon}; enable log_domain"
            )
        # columns are exact after the v-update; rows carry the violation
        if float(np.max(np.abs(u * Kv - a))) <= config.tolerance:
            break
    return u[:, None] * K * v[None, :], iteration


def _scale_log(M: np.ndarray, a: np.ndarray, b: np.ndarray, config: SinkhornConfig,
               g: Optional[np.ndarray] = None):
    """Same iteration on dual potentials f, g; never forms the kernel.

    ``g`` warm-starts the column potential; the final one is returned with the plan.
    """
    eps = config.epsilon
    log_a, log_b = np.log(a), np.log(b)
    f = np.zeros_like(a)
    g = np.zeros_like(b) if g is None else g
    lse_rows = logsumexp((g[None, :] - M) / eps, axis=1)
    iteration = 0
    for iteration in range(1, config.max_iters + 1):
        f = eps * (log_a - lse_rows)
        g = eps * (log_b - logsumexp((f[:, None] - M) / eps, axis=0))
        lse_rows = logsumexp((g[None, :] - M) / eps, axis=1)
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(g))):
            raise SinkhornNumericalError(
                f"non-finite potentials at iteration {iteration}"
            )
        if float(np.max(np.abs(np.exp(f / eps + lse_rows) - a))) <= config.tolerance:
            break
    return np.exp((f[:, None] + g[None, :] - M) / eps), iteration, g


def epsilon_schedule(cost_range: float, epsilon: float) -> list[float]:
    """Geometric decrease from the cost range down to ``epsilon``, which comes last."""
    stages = []
    stage = max(cost_range, epsilon)
    while stage > epsilon * SCALING_FACTOR:
        stages.append(stage)
        stage /= SCALING_FACTOR
    stages.append(epsilon)
    return stages


def _scale_log_annealed(M: np.ndarray, a: np.ndarray, b: np.ndarray,
                        config: SinkhornConfig):
    """Log-domain scaling down an epsilon schedule, warm-starting each stage."""
    g = None
    total = 0
    stages = epsilon_schedule(float(M.max()), config.epsilon)
    for stage in stages[:-1]:
        stage_config = config.model_copy(update={
            "epsilon": stage, "tolerance": max(config.tolerance, STAGE_TOLERANCE),
        })
        _, iterations, g = _scale_log(M, a, b, stage_config, g)
        total += iterations
    plan, iterations, _ = _scale_log(M, a, b, config, g)
    logger.debug(f"epsilon scaling over {len(stages)} stages, "
                 f"{iterations} final iterations")
    return plan, total + iterations


def sinkhorn(
    cost: CostMatrix,
    row_marginal,
    col_marginal,
    config: Optional[SinkhornConfig] = None,
) -> TransportPlan:
    """Solve min <C, Q> - eps H(Q) subject to Q 1 = a, Q^T 1 = b.

    The returned plan records the achieved L-inf marginal violation. When the
    tolerance is not met within ``max_iters`` the plan is still returned, with
    ``converged=False``.
    """
    config = config or SinkhornConfig()
    a = _check_marginal("row_marginal", row_marginal, cost.C)
    b = _check_marginal("col_marginal", col_marginal, cost.N)
    M = cost.entries
    # shifting the cost by a constant leaves the plan unchanged
    M = M - M.min()

    if config.use_epsilon_scaling:
        plan, iterations = _scale_log_annealed(M, a, b, config)
    elif config.use_log_domain:
        plan, iterations, _ = _scale_log(M, a, b, config)
    else:
        plan, iterations = _scale_standard(M, a, b, config)

    if not np.all(np.isfinite(plan)):
        raise SinkhornNumericalError("transport plan contains NaN; enable log_domain")
    residual = _residual(plan, a, b)
    converged = residual <= config.tolerance
    if converged:
        logger.debug(f"Sinkhorn converged in {iterations} iterations "
                     f"(residual {residual:.2e})")
    else:
        logger.warning(
            f"Sinkhorn stopped after {iterations} iterations with residual "
            f"{residual:.3e} > tolerance {config.tolerance:.1e}"
        )
    return TransportPlan(entries=plan, row_marginal=a, col_marginal=b,
                         residual=residual, iterations=iterations, converged=converged)


def uniform_marginals(C: int, N: int) -> tuple[np.ndarray, np.ndarray]:
    return np.full(C, 1.0 / C), np.full(N, 1.0 / N)


def solve_prompt_ot(
    prototypes: FeatureMatrix,
    samples: FeatureMatrix,
    config: Optional[SinkhornConfig] = None,
    temperature: float = 1.0,
) -> TransportPlan:
    """Transport samples onto class prototypes under uniform marginals."""
    cost = build_cost_matrix(prototypes, samples, temperature)
    a, b = uniform_marginals(cost.C, cost.N)
    return sinkhorn(cost, a, b, config)


def pseudo_labels(plan: TransportPlan | np.ndarray) -> np.ndarray:
    """Argmax over classes of each plan column; ties go to the lowest class index."""
    entries = plan.entries if isinstance(plan, TransportPlan) else np.asarray(plan)
    if entries.ndim != 2:
        raise InvalidInputError("plan must be a C x N matrix")
    return np.argmax(entries, axis=0).astype(np.int64)


def solve_prompt_ot_batched(
    prototypes: FeatureMatrix,
    samples: FeatureMatrix,
    config: Optional[SinkhornConfig] = None,
    temperature: float = 1.0,
    batch_size: int = 32,
) -> tuple[np.ndarray, list[TransportPlan]]:
    """Per-batch OT in sample order; returns the joined pseudo-labels and each plan."""
    if batch_size < 1:
        raise InvalidInputError("batch_size must be positive")
    labels: list[np.ndarray] = []
    plans: list[TransportPlan] = []
    for start in range(0, samples.rows, batch_size):
        batch = samples.take(np.arange(start, min(start + batch_size, samples.rows)))
        plan = solve_prompt_ot(prototypes, batch, config, temperature)
        plans.append(plan)
        labels.append(pseudo_labels(plan))
    if not labels:
        return np.zeros(0, dtype=np.int64), plans
    return np.concatenate(labels), plans


def plan_objective(cost: CostMatrix, plan: TransportPlan) -> float:
    """Transport cost <C, Q>."""
    return float(np.sum(cost.entries * plan.entries))


def epsilon_scan(
    cost: CostMatrix,
    row_marginal,
    col_marginal,
    epsilons: Iterable[float],
    config: Optional[SinkhornConfig] = None,
) -> list[EpsilonScanPoint]:
    """Objective of the entropic plan for each epsilon, log domain chosen per value."""
    base = config or SinkhornConfig()
    points = []
    for epsilon in epsilons:
        scan_config = base.model_copy(update={"epsilon": float(epsilon)})
        plan = sinkhorn(cost, row_marginal, col_marginal, scan_config)
        points.append(EpsilonScanPoint(epsilon=float(epsilon),
                                       objective=plan_objective(cost, plan),
                                       residual=plan.residual,
                                       converged=plan.converged))
    return points
