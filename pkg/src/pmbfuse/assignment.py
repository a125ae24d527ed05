"""Optimal and k-best 2-D assignment with per-row unassignment options.

Problems are rectangular: each of the n1 rows is paired with one of n2
columns or left unassigned at a row-specific cost.  Forbidden pairings are
encoded as infinite costs.  The k-best enumeration is Murty's partitioning
scheme with :func:`scipy.optimize.linear_sum_assignment` as the inner
solver.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

__all__ = ["AssignmentProblem", "best_assignment", "murty_kbest"]

UNASSIGNED = -1


@dataclass(frozen=True, eq=False)
class AssignmentProblem:
    """Pairing costs (n1 x n2, +inf allowed) and per-row unassignment costs.

    A solution is a length-n1 integer vector whose entries are column
    indices or ``UNASSIGNED``; distinct rows may not share a column.
    """

    pair_costs: np.ndarray
    unassigned_costs: np.ndarray

    def __post_init__(self) -> None:
        unassigned = np.atleast_1d(np.asarray(self.unassigned_costs, dtype=float))
        pair = np.asarray(self.pair_costs, dtype=float)
        if pair.ndim == 1 and pair.size == 0:
            pair = pair.reshape(unassigned.shape[0], 0)
        pair = np.atleast_2d(pair)
        if pair.shape[0] != unassigned.shape[0]:
            raise ValueError("row counts of pair_costs and unassigned_costs differ")
        for arr in (pair, unassigned):
            lo = float(arr.min(initial=0.0))  # min propagates NaN
            if math.isnan(lo) or lo == -math.inf:
                raise ValueError("assignment costs must not be NaN or -inf")
        pair.setflags(write=False)
        unassigned.setflags(write=False)
        object.__setattr__(self, "pair_costs", pair)
        object.__setattr__(self, "unassigned_costs", unassigned)

    @property
    def n_rows(self) -> int:
        return self.pair_costs.shape[0]

    @property
    def n_cols(self) -> int:
        return self.pair_costs.shape[1]

    def _augmented(self) -> np.ndarray:
        # Pair costs with one unassignment column per row appended (inf off
        # the diagonal); built once and shared by every Murty node.
        aug = getattr(self, "_aug", None)
        if aug is None:
            n1, n2 = self.pair_costs.shape
            aug = np.full((n1, n2 + n1), np.inf)
            aug[:, :n2] = self.pair_costs
            aug[np.arange(n1), n2 + np.arange(n1)] = self.unassigned_costs
            aug.setflags(write=False)
            object.__setattr__(self, "_aug", aug)
        return aug

    def solution_cost(self, solution: np.ndarray) -> float:
        cost = 0.0
        for i, j in enumerate(solution):
            cost += self.unassigned_costs[i] if j == UNASSIGNED else self.pair_costs[i, j]
        return float(cost)


def _solve_restricted(
    problem: AssignmentProblem,
    forced: tuple[tuple[int, int], ...],
    forbidden: frozenset[tuple[int, int]],
) -> tuple[float, np.ndarray] | None:
    """Optimal solution honouring forced pairings and forbidden pairings,
    or None when infeasible."""
    n1, n2 = problem.n_rows, problem.n_cols
    forced_rows = {i for i, _ in forced}
    blocked_cols = [j for _, j in forced if j != UNASSIGNED]
    free = [i for i in range(n1) if i not in forced_rows]
    base = 0.0
    for i, j in forced:
        base += problem.unassigned_costs[i] if j == UNASSIGNED else problem.pair_costs[i, j]
    if not math.isfinite(base):
        return None
    # Rows of the precomputed augmented matrix; unassignment columns of
    # forced rows are left in place (all-inf, so never chosen).
    costs = problem._augmented()[free].copy() if forced or forbidden else problem._augmented()
    if blocked_cols:
        costs[:, blocked_cols] = np.inf
    pos = {i: a for a, i in enumerate(free)}
    for i, j in forbidden:
        a = pos.get(i)
        if a is None:
            continue
        costs[a, n2 + i if j == UNASSIGNED else j] = np.inf
    try:
        rows, cols = linear_sum_assignment(costs)
    except ValueError:
        return None
    total = base + float(costs[rows, cols].sum())
    if not math.isfinite(total):
        return None
    solution = np.full(n1, UNASSIGNED, dtype=int)
    for i, j in forced:
        solution[i] = j
    for a, c in zip(rows, cols):
        solution[free[a]] = UNASSIGNED if c >= n2 else int(c)
    return total, solution


def best_assignment(problem: AssignmentProblem) -> tuple[np.ndarray, float]:
    """Minimum-cost solution.  Raises ValueError when every completion is
    blocked by infinite costs."""
    result = _solve_restricted(problem, (), frozenset())
    if result is None:
        raise ValueError("assignment problem has no feasible solution")
    cost, solution = result
    return solution, cost


def murty_kbest(
    problem: AssignmentProblem,
    k: int,
    cost_gap: float | None = None,
) -> list[tuple[np.ndarray, float]]:
    """Up to ``k`` cheapest solutions in non-decreasing cost order.

    Murty's method: pop the best node, emit its solution, and split its
    search space into disjoint children by successively forbidding each
    pairing of the emitted solution while forcing the preceding ones.  Every
    child requires one inner solve, so the cost is O(k * n1) solves.

    ``cost_gap``, when given, stops the enumeration once the next-best
    solution is more than ``cost_gap`` worse than the optimum; useful when
    downstream weights exp(-cost) below some ratio would be discarded
    anyway.  Fewer than ``k`` solutions are returned when the feasible set
    is exhausted.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    root = _solve_restricted(problem, (), frozenset())
    if root is None:
        return []
    best_cost = root[0]
    counter = 0
    heap: list[tuple[float, int, tuple, frozenset, np.ndarray]] = [
        (root[0], counter, (), frozenset(), root[1])
    ]
    results: list[tuple[np.ndarray, float]] = []
    while heap and len(results) < k:
        cost, _, forced, forbidden, solution = heapq.heappop(heap)
        if cost_gap is not None and cost - best_cost > cost_gap:
            break
        results.append((solution, cost))
        if len(results) == k:
            break
        forced_rows = {i for i, _ in forced}
        free = [i for i in range(problem.n_rows) if i not in forced_rows]
        fix: list[tuple[int, int]] = []
        for i in free:
            child_forbidden = forbidden | {(i, int(solution[i]))}
            child_forced = forced + tuple(fix)
            solved = _solve_restricted(problem, child_forced, child_forbidden)
            if solved is not None and (
                cost_gap is None or solved[0] - best_cost <= cost_gap
            ):
                counter += 1
                heapq.heappush(
                    heap, (solved[0], counter, child_forced, child_forbidden, solved[1])
                )
            fix.append((i, int(solution[i])))
    return results
