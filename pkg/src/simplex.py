"""Dense phase-one simplex for equality-constrained feasibility problems.

Finds x >= 0 with A x = b, or shows none exists, by minimizing the sum of
artificial variables. Pivoting follows Bland's rule so degenerate problems
terminate.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from src.errors import MalformedInputError, SolverFailureError

logger = logging.getLogger(__name__)

DEFAULT_PIVOT_TOL = 1e-11
DEFAULT_MAX_ITERATIONS = 10_000


@dataclass(frozen=True)
class PhaseOneResult:
    """Outcome of a phase-one solve.

    Attributes:
        x: Values of the original variables at the final basis
        infeasibility: Sum of the artificial variables (zero iff feasible)
        iterations: Number of pivots performed
    """

    x: npt.NDArray[np.float64]
    infeasibility: float
    iterations: int


def _pivot(tableau: npt.NDArray[np.float64], row: int, col: int, pivot_tol: float) -> None:
    tableau[row] /= tableau[row, col]
    factors = tableau[:, col].copy()
    factors[row] = 0.0
    tableau -= np.outer(factors, tableau[row])
    rhs = tableau[:-1, -1]
    rhs[(rhs < 0.0) & (rhs > -pivot_tol)] = 0.0


def phase_one(
    a_eq: npt.ArrayLike,
    b_eq: npt.ArrayLike,
    *,
    pivot_tol: float = DEFAULT_PIVOT_TOL,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> PhaseOneResult:
    """Minimize the total infeasibility of A x = b over x >= 0.

    Args:
        a_eq: Constraint matrix of shape (m, n)
        b_eq: Right-hand side of shape (m,)
        pivot_tol: Reduced costs and pivot entries smaller than this count as zero
        max_iterations: Pivot budget

    Returns:
        Final point and its infeasibility

    Raises:
        MalformedInputError: If shapes disagree or entries are not finite
        SolverFailureError: If the pivot budget is exhausted
    """
    a = np.array(a_eq, dtype=np.float64)
    b = np.array(b_eq, dtype=np.float64)
    if a.ndim != 2 or b.shape != (a.shape[0],):
        raise MalformedInputError(f"Incompatible shapes {a.shape} and {b.shape}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise MalformedInputError("Constraint data must be finite")

    m, n = a.shape
    negative = b < 0
    a[negative] *= -1.0
    b[negative] *= -1.0

    tableau = np.zeros((m + 1, n + m + 1))
    tableau[:m, :n] = a
    tableau[:m, n : n + m] = np.eye(m)
    tableau[:m, -1] = b
    tableau[m, :n] = -a.sum(axis=0)
    tableau[m, -1] = -b.sum()
    basis = np.arange(n, n + m)

    iterations = 0
    while True:
        entering = np.flatnonzero(tableau[m, :-1] < -pivot_tol)
        if entering.size == 0:
            break
        if iterations >= max_iterations:
            raise SolverFailureError(f"Simplex did not converge within {max_iterations} pivots")
        col = int(entering[0])
        column = tableau[:m, col]
        candidates = np.flatnonzero(column > pivot_tol)
        if candidates.size == 0:
            raise SolverFailureError("Phase-one objective became unbounded")
        ratios = tableau[candidates, -1] / column[candidates]
        tied = candidates[ratios <= ratios.min() + pivot_tol]
        row = int(tied[np.argmin(basis[tied])])
        _pivot(tableau, row, col, pivot_tol)
        basis[row] = col
        iterations += 1

    solution = np.zeros(n + m)
    solution[basis] = tableau[:m, -1]
    infeasibility = float(np.abs(solution[n:]).sum())
    logger.debug(
        "Phase one finished after %d pivots, infeasibility %.3g", iterations, infeasibility
    )
    return PhaseOneResult(x=solution[:n], infeasibility=infeasibility, iterations=iterations)
