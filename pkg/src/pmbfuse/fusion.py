"""Fusion of two PMB densities held by different agents.

The geometric rule normalises f1^omega f2^(1-omega).  Fractional powers of
a PMB are approximated componentwise (the approximation upper-bounds the
true power and is exact for Bernoulli existence and single-Gaussian
densities); the product of the two powered PMBs is then an exact PMBM whose
global hypotheses range over all pairings between the Bernoulli components
of the two agents.  Pairings are enumerated best-first on their negative
log weights.

The arithmetic rule averages the two densities component-by-component after
a one-to-one association of the Bernoulli components, and serves as the
cheap baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .assignment import UNASSIGNED, AssignmentProblem, best_assignment, murty_kbest
from .filtering import FilterParams
from .gaussian import (
    Gaussian,
    GaussianMixture,
    gaussian_power,
    gaussian_product,
    mahalanobis_sq,
    mixture_power,
    mixture_product,
    moment_match,
    prune_merge_mixture,
)
from .rfs import (
    BernoulliComponent,
    GlobalHypothesis,
    LocalHypothesis,
    PMBDensity,
    PMBMDensity,
)

__all__ = [
    "FusionParams",
    "fuse_aa",
    "fuse_bernoulli_bernoulli",
    "fuse_bernoulli_ppp",
    "fuse_gci",
    "fuse_ppp",
    "log_power_scale",
    "pmb_power_approx",
]

_LOG_FLOOR = -700.0


def _safe_log(x: float) -> float:
    return math.log(x) if x > 1e-300 else _LOG_FLOOR


@dataclass(frozen=True)
class FusionParams:
    """Mixing weight, cross-agent gate (squared Mahalanobis) and the budget
    of fused global hypotheses."""

    omega: float = 0.5
    gate: float = math.inf
    murty_k: int = 200

    def __post_init__(self) -> None:
        if not (0.0 < self.omega < 1.0):
            raise ValueError("omega must lie strictly between 0 and 1")
        if not self.gate > 0.0:
            raise ValueError("gate must be positive")
        if self.murty_k < 1:
            raise ValueError("murty_k must be at least 1")


def pmb_power_approx(pmb: PMBDensity, omega: float) -> PMBDensity:
    """Componentwise omega-power of a PMB, up to a constant factor.

    The PPP intensity is powered with :func:`mixture_power`.  Each Bernoulli
    (r, p) becomes (r_q, p_q) with s = integral of p^omega,
    r_q = r^omega s / ((1 - r)^omega + r^omega s) and p_q = p^omega / s.
    The dropped constant is available from :func:`log_power_scale`.
    """
    if omega == 1.0:
        return pmb
    if not (0.0 < omega < 1.0):
        raise ValueError("omega must lie in (0, 1]")
    berns = []
    for b in pmb.bernoullis:
        powered = gaussian_power(b.density, omega)
        num = b.r**omega * powered.scale
        den = (1.0 - b.r) ** omega + num
        berns.append(BernoulliComponent(num / den, powered.gaussian))
    return PMBDensity(mixture_power(pmb.ppp, omega), tuple(berns))


def log_power_scale(pmb: PMBDensity, omega: float) -> float:
    """Log of the constant alpha with f(X)^omega <= alpha * q(X), where q is
    the PMB returned by :func:`pmb_power_approx`.

    alpha collects the Poisson normalisation mismatch between omega times
    the original intensity mass and the mass of the powered intensity, and
    per Bernoulli the factor (1 - r)^omega + r^omega * integral of p^omega.
    """
    if not (0.0 < omega <= 1.0):
        raise ValueError("omega must lie in (0, 1]")
    out = mixture_power(pmb.ppp, omega).total_weight - omega * pmb.ppp.total_weight
    for b in pmb.bernoullis:
        s = 1.0 if omega == 1.0 else gaussian_power(b.density, omega).scale
        out += _safe_log((1.0 - b.r) ** omega + b.r**omega * s)
    return out


def fuse_ppp(
    ppp1: GaussianMixture,
    ppp2: GaussianMixture,
    params: FusionParams,
    fp: FilterParams,
) -> GaussianMixture:
    """Geometric fusion of two PPP intensities: componentwise powers, all
    pairwise products, then mixture reduction with the agent's thresholds."""
    product = mixture_product(
        mixture_power(ppp1, params.omega), mixture_power(ppp2, 1.0 - params.omega)
    )
    return prune_merge_mixture(product, fp.ppp_prune, fp.ppp_merge, fp.ppp_max)


def fuse_bernoulli_bernoulli(
    b1: BernoulliComponent, b2: BernoulliComponent
) -> tuple[float, BernoulliComponent]:
    """Product of two Bernoullis claiming the same object, as (rho, Bernoulli).

    rho = r1 r2 <p1, p2> is the pairing weight and the paired component
    exists with certainty.  The case of both components being empty belongs
    to the unpaired hypotheses (it must not be double counted), which is what
    makes a flat mixture over pairings reproduce the product density exactly.
    """
    product = gaussian_product(b1.density, b2.density)
    rho = b1.r * b2.r * product.scale
    if rho > 0.0:
        return rho, BernoulliComponent(1.0, product.gaussian)
    return 0.0, BernoulliComponent(0.0, b1.density)


def fuse_bernoulli_ppp(
    b: BernoulliComponent,
    intensity: GaussianMixture,
    gate: float = math.inf,
) -> tuple[float, BernoulliComponent]:
    """Product of a Bernoulli with the other agent's PPP intensity, for
    components left unpaired: rho = (1 - r) + r <p, lambda>.

    Intensity components outside ``gate`` (squared Mahalanobis against the
    Bernoulli density) are skipped.
    """
    hits: list[tuple[float, Gaussian]] = []
    for w, g in intensity.components:
        if gate is not math.inf and mahalanobis_sq(b.density, g) >= gate:
            continue
        product = gaussian_product(b.density, g)
        if w * product.scale > 0.0:
            hits.append((w * product.scale, product.gaussian))
    inner = float(sum(w for w, _ in hits))
    rho = (1.0 - b.r) + b.r * inner
    if b.r * inner > 0.0 and rho > 0.0:
        r = b.r * inner / rho
        density = hits[0][1] if len(hits) == 1 else moment_match(hits)
        return rho, BernoulliComponent(min(r, 1.0), density)
    return rho, BernoulliComponent(0.0, b.density)


def fuse_gci(
    pmb1: PMBDensity,
    pmb2: PMBDensity,
    params: FusionParams,
    fp: FilterParams,
    cost_gap: float | None = None,
) -> PMBMDensity:
    """Geometric (covariance-intersection) fusion of two PMB densities.

    Both inputs are powered with :func:`pmb_power_approx` (omega and
    1 - omega); their product is an exact PMBM with one track per Bernoulli
    component of either agent.  A global hypothesis pairs some components of
    agent 1 with components of agent 2; pairing weights rho come from
    :func:`fuse_bernoulli_bernoulli`, unpaired weights from
    :func:`fuse_bernoulli_ppp` against the other agent's powered intensity.
    The ``params.murty_k`` heaviest globals are kept and renormalised.
    Pairs whose densities are further apart than ``params.gate`` are never
    formed.  ``cost_gap`` optionally stops the enumeration early relative to
    the best global (see :func:`pmbfuse.assignment.murty_kbest`).

    The result carries partner bookkeeping: hypothesis ``assigned`` fields
    name the agent-2 component consumed, and ``n_partners`` is the number of
    agent-2 components.
    """
    q1 = pmb_power_approx(pmb1, params.omega)
    q2 = pmb_power_approx(pmb2, 1.0 - params.omega)
    ppp = fuse_ppp(pmb1.ppp, pmb2.ppp, params, fp)
    n1, n2 = len(q1.bernoullis), len(q2.bernoullis)

    tracks: list[list[LocalHypothesis]] = []
    hyp_col: list[dict[int, int]] = []
    log_solo1 = []
    for b in q1.bernoullis:
        rho, fused = fuse_bernoulli_ppp(b, q2.ppp, params.gate)
        tracks.append([LocalHypothesis(rho, fused)])
        hyp_col.append({})
        log_solo1.append(_safe_log(rho))
    log_solo2 = []
    for j, b in enumerate(q2.bernoullis):
        rho, fused = fuse_bernoulli_ppp(b, q1.ppp, params.gate)
        tracks.append(
            [
                LocalHypothesis(1.0, BernoulliComponent(0.0, b.density)),
                LocalHypothesis(rho, fused, assigned=j),
            ]
        )
        log_solo2.append(_safe_log(rho))

    pair_costs = np.full((n1, n2), np.inf)
    for i, b1 in enumerate(q1.bernoullis):
        for j, b2 in enumerate(q2.bernoullis):
            if mahalanobis_sq(b1.density, b2.density) >= params.gate:
                continue
            rho, fused = fuse_bernoulli_bernoulli(b1, b2)
            if rho <= 0.0:
                continue
            tracks[i].append(LocalHypothesis(rho, fused, assigned=j))
            hyp_col[i][j] = len(tracks[i]) - 1
            pair_costs[i, j] = -(_safe_log(rho) - log_solo1[i] - log_solo2[j])

    base = float(sum(log_solo1) + sum(log_solo2))
    problem = AssignmentProblem(pair_costs, np.zeros(n1))
    solutions = murty_kbest(problem, params.murty_k, cost_gap=cost_gap)
    if not solutions:
        raise ValueError("no feasible pairing in fusion")

    log_weights = np.array([base - cost for _, cost in solutions])
    weights = np.exp(log_weights - log_weights.max())
    weights /= weights.sum()
    globals_ = []
    for (solution, _), w in zip(solutions, weights):
        indices = np.zeros(n1 + n2, dtype=int)
        claimed = set()
        for i in range(n1):
            j = int(solution[i])
            if j != UNASSIGNED:
                indices[i] = hyp_col[i][j]
                claimed.add(j)
        for j in range(n2):
            indices[n1 + j] = 0 if j in claimed else 1
        globals_.append(GlobalHypothesis(float(w), tuple(indices)))

    return PMBMDensity(ppp, tuple(tuple(t) for t in tracks), tuple(globals_), n2)


def fuse_aa(pmb1: PMBDensity, pmb2: PMBDensity, params: FusionParams) -> PMBDensity:
    """Arithmetic-average fusion of two PMB densities.

    The fused PPP intensity is omega * lambda1 + (1 - omega) * lambda2.
    Bernoulli components are associated one-to-one by minimum squared
    Mahalanobis distance below ``params.gate``; an associated pair becomes a
    single Bernoulli with r = omega r1 + (1 - omega) r2 and the
    moment-matched density of the weighted pair, while unassociated
    components keep their density with existence scaled by their agent's
    mixing weight.
    """
    w1, w2 = params.omega, 1.0 - params.omega
    ppp = GaussianMixture(
        tuple((w1 * w, g) for w, g in pmb1.ppp.components)
        + tuple((w2 * w, g) for w, g in pmb2.ppp.components)
    )
    n1, n2 = len(pmb1.bernoullis), len(pmb2.bernoullis)
    costs = np.full((n1, n2), np.inf)
    for i, b1 in enumerate(pmb1.bernoullis):
        for j, b2 in enumerate(pmb2.bernoullis):
            d = mahalanobis_sq(b1.density, b2.density)
            if d < params.gate:
                costs[i, j] = d
    # Shift gated pairings below zero so any of them beats leaving both
    # components unpaired; with an infinite gate the margin is taken past
    # the largest distance instead.
    finite = costs[np.isfinite(costs)]
    if finite.size:
        margin = params.gate if math.isfinite(params.gate) else float(finite.max()) + 1.0
        costs = np.where(np.isfinite(costs), costs - margin, np.inf)
    solution = (
        best_assignment(AssignmentProblem(costs, np.zeros(n1)))[0]
        if n1
        else np.empty(0, dtype=int)
    )
    berns = []
    claimed = set()
    for i, b1 in enumerate(pmb1.bernoullis):
        j = int(solution[i])
        if j != UNASSIGNED:
            claimed.add(j)
            b2 = pmb2.bernoullis[j]
            r = w1 * b1.r + w2 * b2.r
            parts = [(w1 * b1.r, b1.density), (w2 * b2.r, b2.density)]
            density = moment_match(parts) if r > 0.0 else b1.density
            berns.append(BernoulliComponent(min(r, 1.0), density))
        else:
            berns.append(BernoulliComponent(w1 * b1.r, b1.density))
    for j, b2 in enumerate(pmb2.bernoullis):
        if j not in claimed:
            berns.append(BernoulliComponent(w2 * b2.r, b2.density))
    return PMBDensity(ppp, tuple(berns))
