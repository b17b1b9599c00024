"""Optimal-transport services: costs, Sinkhorn scaling, decoding, the exact oracle."""
from app.services.transport.benchmark_service import (
    compare_with_oracle,
    measure_throughput,
)
from app.services.transport.cost_service import build_cost_matrix, similarity_matrix
from app.services.transport.oracle_service import lp_oracle
from app.services.transport.sinkhorn_service import (
    epsilon_scan,
    epsilon_schedule,
    plan_objective,
    pseudo_labels,
    sinkhorn,
    solve_prompt_ot,
    solve_prompt_ot_batched,
    uniform_marginals,
)

__all__ = [
    "compare_with_oracle",
    "measure_throughput",
    "build_cost_matrix",
    "similarity_matrix",
    "lp_oracle",
    "epsilon_scan",
    "epsilon_schedule",
    "plan_objective",
    "pseudo_labels",
    "sinkhorn",
    "solve_prompt_ot",
    "solve_prompt_ot_batched",
    "uniform_marginals",
]
