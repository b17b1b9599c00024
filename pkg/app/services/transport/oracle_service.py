"""Exact optimal transport for tiny square instances by exhaustive enumeration.

With C == N and uniform marginals the optimum of the linear program sits on a
vertex of the Birkhoff polytope, so the minimum over all N! permutations is
the exact answer.
"""
import itertools

import numpy as np

from app.core.errors import MarginalError, OracleTooLargeError
from app.schemas.transport import CostMatrix, TransportPlan

MAX_ORACLE_SIZE = 8
UNIFORM_TOLERANCE = 1e-12


def _require_uniform(name: str, marginal, length: int) -> np.ndarray:
    marginal = np.asarray(marginal, dtype=np.float64)
    if marginal.shape != (length,):
        raise MarginalError(f"{name} has shape {marginal.shape}, expected ({length},)")
    if np.max(np.abs(marginal - 1.0 / length)) > UNIFORM_TOLERANCE:
        raise MarginalError(f"{name} must be uniform for the enumeration oracle")
    return marginal


def best_permutation(entries: np.ndarray) -> tuple[tuple[int, ...], float]:
    """Cheapest assignment row -> column; the lexicographically first one wins ties."""
    n = entries.shape[0]
    rows = np.arange(n)
    best, best_cost = None, np.inf
    for perm in itertools.permutations(range(n)):
        total = float(entries[rows, perm].sum())
        if total < best_cost:
            best, best_cost = perm, total
    return best, best_cost


def lp_oracle(cost: CostMatrix, row_marginal, col_marginal) -> TransportPlan:
    """Return (1/N) P* for the cost-minimising permutation matrix P*."""
    if cost.C != cost.N:
        raise OracleTooLargeError(f"oracle needs a square cost, got {cost.C}x{cost.N}")
    if cost.N > MAX_ORACLE_SIZE:
        raise OracleTooLargeError(
            f"oracle enumerates N! permutations; N={cost.N} exceeds {MAX_ORACLE_SIZE}"
        )
    n = cost.N
    a = _require_uniform("row_marginal", row_marginal, n)
    b = _require_uniform("col_marginal", col_marginal, n)

    perm, _ = best_permutation(cost.entries)
    plan = np.zeros((n, n))
    plan[np.arange(n), perm] = 1.0 / n
    return TransportPlan(entries=plan, row_marginal=a, col_marginal=b,
                         residual=0.0, iterations=0, converged=True)
