"""Solver checks against the enumeration oracle and a desk-scale timing run."""
from time import perf_counter
from typing import Iterable

import numpy as np

from app.core.errors import InvalidInputError
from app.core.logging import logger
from app.schemas.features import FeatureMatrix
from app.schemas.transport import (
    CostMatrix,
    OracleComparison,
    SinkhornConfig,
    ThroughputMeasurement,
)
from app.services.transport.oracle_service import MAX_ORACLE_SIZE, lp_oracle
from app.services.transport.sinkhorn_service import (
    plan_objective,
    sinkhorn,
    solve_prompt_ot,
    uniform_marginals,
)
from app.utils.rng import make_rng

ORACLE_STREAM = 13
THROUGHPUT_STREAM = 14


def compare_with_oracle(instances: int, max_n: int, epsilons: Iterable[float],
                        seed: int = 0,
                        max_iters: int = 20_000) -> list[OracleComparison]:
    """Random uniform-marginal square instances, solved exactly and by Sinkhorn.

    Costs are uniform on [0, 1]; sizes are drawn from 2..max_n.
    """
    if not 2 <= max_n <= MAX_ORACLE_SIZE:
        raise InvalidInputError(f"max_n must lie in [2, {MAX_ORACLE_SIZE}]")
    epsilons = [float(epsilon) for epsilon in epsilons]
    rng = make_rng(seed, ORACLE_STREAM)
    results = []
    for _ in range(instances):
        n = int(rng.integers(2, max_n + 1))
        cost = CostMatrix(entries=rng.random((n, n)))
        a, b = uniform_marginals(n, n)
        exact = plan_objective(cost, lp_oracle(cost, a, b))
        for epsilon in epsilons:
            config = SinkhornConfig(epsilon=epsilon, max_iters=max_iters)
            plan = sinkhorn(cost, a, b, config)
            results.append(OracleComparison(n=n, epsilon=epsilon, exact=exact,
                                            entropic=plan_objective(cost, plan),
                                            converged=plan.converged,
                                            iterations=plan.iterations))
    return results


def measure_throughput(C: int = 100, N: int = 10_000, dim: int = 64,
                       epsilon: float = 0.05, seed: int = 0) -> ThroughputMeasurement:
    """Time one prototype OT solve on random unit embeddings."""
    rng = make_rng(seed, THROUGHPUT_STREAM)
    prototypes = FeatureMatrix.normalized_from(rng.standard_normal((C, dim)))
    samples = FeatureMatrix.normalized_from(rng.standard_normal((N, dim)))
    start = perf_counter()
    plan = solve_prompt_ot(prototypes, samples, SinkhornConfig(epsilon=epsilon))
    seconds = perf_counter() - start
    logger.info(f"{C}x{N} OT solve at eps={epsilon:g} took {seconds:.3f}s "
                f"({plan.iterations} iterations)")
    return ThroughputMeasurement(C=C, N=N, epsilon=epsilon, seconds=seconds,
                           iterations=plan.iterations, converged=plan.converged)
