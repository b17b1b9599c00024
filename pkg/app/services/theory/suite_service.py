"""Multi-seed CE-versus-MAE comparison and ratio tables."""
from typing import Iterable, Sequence

import numpy as np
from joblib import Parallel, delayed

from app.core.config import N_JOBS
from app.core.errors import InvalidInputError, RatioDomainError
from app.core.logging import logger
from app.schemas.theory import (
    RatioCell,
    SeedOutcome,
    TheoremSuiteSummary,
    TheoryConfig,
)
from app.services.theory.dynamics_service import (
    chain_holds,
    expected_update_ratios,
    train_prompt,
)


def _run_seed(base_config: TheoryConfig, seed: int) -> SeedOutcome:
    ce = train_prompt(base_config.model_copy(update={"loss_kind": "ce",
                                                     "seed": seed}))
    mae = train_prompt(base_config.model_copy(update={"loss_kind": "mae",
                                                      "seed": seed}))
    return SeedOutcome(
        seed=seed,
        ce_error=ce.final.test_loss,
        mae_error=mae.final.test_loss,
        ce_snr=ce.snr,
        mae_snr=mae.snr,
    )


def summarize(outcomes: Sequence[SeedOutcome]) -> TheoremSuiteSummary:
    count = len(outcomes)
    not_worse = sum(o.mae_error <= o.ce_error for o in outcomes)
    snr_higher = sum(o.mae_snr > o.ce_snr for o in outcomes)
    return TheoremSuiteSummary(
        outcomes=tuple(outcomes),
        mae_not_worse_fraction=not_worse / count,
        mae_snr_higher_fraction=snr_higher / count,
        mean_ce_error=float(np.mean([o.ce_error for o in outcomes])),
        mean_mae_error=float(np.mean([o.mae_error for o in outcomes])),
    )


def run_theorem_suite(base_config: TheoryConfig, seeds: Iterable[int],
                      n_jobs: int = N_JOBS) -> TheoremSuiteSummary:
    """Train CE and MAE prompts on the same data for every seed.

    Seeds run in parallel; outcomes are merged in seed order.
    """
    seeds = sorted(set(int(seed) for seed in seeds))
    if not seeds:
        raise InvalidInputError("at least one seed is required")
    outcomes = Parallel(n_jobs=n_jobs)(
        delayed(_run_seed)(base_config, seed) for seed in seeds
    )
    summary = summarize(outcomes)
    logger.info(
        f"CE vs MAE over {len(seeds)} seeds: MAE not worse in "
        f"{summary.mae_not_worse_fraction:.0%}, "
        f"mean error CE={summary.mean_ce_error:.4f} MAE={summary.mean_mae_error:.4f}"
    )
    return summary


def ratio_table(mean_s_y_grid: Iterable[float],
                p_grid: Iterable[float]) -> list[RatioCell]:
    """Update ratios over a grid; cells outside the valid region are skipped."""
    cells = []
    p_values = list(p_grid)
    for mean_s_y in mean_s_y_grid:
        for p_noise in p_values:
            try:
                beta_ratio, phi_ratio = expected_update_ratios(mean_s_y, p_noise)
            except RatioDomainError as exc:
                logger.debug(f"skipping E[s_y]={mean_s_y:g}, p={p_noise:g}: {exc}")
                continue
            cells.append(RatioCell(
                mean_s_y=mean_s_y, p_noise=p_noise, beta_ratio=beta_ratio,
                phi_ratio=phi_ratio,
                chain_holds=chain_holds(mean_s_y, beta_ratio, phi_ratio),
            ))
    return cells
