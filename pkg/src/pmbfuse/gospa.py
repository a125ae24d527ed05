"""GOSPA metric for sets of points (alpha = 2 variant).

The metric pairs ground-truth and estimated points through an optimal
assignment: paired points contribute their distance to the p-th power
(pairs further apart than the cutoff are never formed), and every unpaired
point on either side contributes c^p / 2, interpreted as a missed or false
object.  The decomposition of the p-th power of the metric into
localisation, missed and false terms is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .assignment import UNASSIGNED, AssignmentProblem, best_assignment

__all__ = ["GospaParams", "GospaResult", "gospa", "rms_gospa"]


@dataclass(frozen=True)
class GospaParams:
    """Cutoff distance ``c`` and exponent ``p`` (the alpha = 2 convention is
    built in)."""

    cutoff: float = 10.0
    order: float = 2.0

    def __post_init__(self) -> None:
        if not (self.cutoff > 0.0 and math.isfinite(self.cutoff)):
            raise ValueError("cutoff must be positive and finite")
        if not (1.0 <= self.order < math.inf):
            raise ValueError("order must be at least 1")


@dataclass(frozen=True)
class GospaResult:
    """Metric value and its decomposition.

    ``localisation``, ``missed`` and ``false`` are p-th power costs, so
    total == (localisation + missed + false) ** (1 / p).
    """

    total: float
    localisation: float
    missed: float
    false: float


def _as_points(x, dim_hint: int | None) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.size == 0:
        return a.reshape(0, dim_hint if dim_hint else 0)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2:
        raise ValueError("point sets must be (n, dim) arrays")
    return a


def gospa(truth, estimates, params: GospaParams = GospaParams()) -> GospaResult:
    """GOSPA distance between a truth set and an estimate set of points.

    Either set may be empty.  The optimal pairing minimises
    sum d^p over pairs + c^p/2 * (number unpaired); pairs at distance >= c
    are excluded, which never sacrifices optimality since such a pair costs
    at least as much as leaving both points unpaired.
    """
    c, p = params.cutoff, params.order
    half_cp = 0.5 * c**p
    truth = _as_points(truth, None)
    estimates = _as_points(estimates, truth.shape[1] if truth.size else None)
    n, m = truth.shape[0], estimates.shape[0]
    if n and m and truth.shape[1] != estimates.shape[1]:
        raise ValueError("truth and estimate dimensions differ")
    if n == 0 or m == 0:
        missed, false = n * half_cp, m * half_cp
        return GospaResult((missed + false) ** (1.0 / p), 0.0, missed, false)
    dist = np.linalg.norm(truth[:, None, :] - estimates[None, :, :], axis=-1)
    # Pairing row i with column j saves two unpaired penalties and adds d^p.
    pair = np.where(dist < c, dist**p - 2.0 * half_cp, np.inf)
    solution, _ = best_assignment(AssignmentProblem(pair, np.zeros(n)))
    localisation = 0.0
    paired = 0
    for i, j in enumerate(solution):
        if j != UNASSIGNED:
            localisation += float(dist[i, j]) ** p
            paired += 1
    missed = (n - paired) * half_cp
    false = (m - paired) * half_cp
    total = (localisation + missed + false) ** (1.0 / p)
    return GospaResult(total, localisation, missed, false)


def rms_gospa(per_run_per_step: Sequence[Sequence[GospaResult]]) -> tuple[np.ndarray, float]:
    """Root-mean-square GOSPA over a (runs x steps) grid of results.

    Returns the per-step RMS curve (averaging squared totals across runs)
    and the overall RMS across every entry.  All rows must have the same
    length.
    """
    totals = np.array([[r.total for r in row] for row in per_run_per_step], dtype=float)
    if totals.ndim != 2 or totals.size == 0:
        raise ValueError("expected a non-empty runs x steps grid of results")
    per_step = np.sqrt(np.mean(totals**2, axis=0))
    overall = float(np.sqrt(np.mean(totals**2)))
    return per_step, overall
