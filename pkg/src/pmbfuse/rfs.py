"""Random-finite-set density types.

A Poisson multi-Bernoulli (PMB) density is a Poisson point process (PPP)
intensity for undetected objects plus an independent list of Bernoulli
components for potential objects.  A Poisson multi-Bernoulli mixture (PMBM)
keeps, per potential object ("track"), a list of local hypotheses and a set
of weighted global hypotheses, each global selecting one local hypothesis
per track.

Global hypotheses are stored in track-oriented form: a global is a vector of
local-hypothesis indices, one entry per track, together with a weight.  When
a density was just produced by a measurement update or a fusion step, each
selected local hypothesis records which measurement (or which fusion-partner
component) it claims, and every partner index must be claimed exactly once
across the tracks of any global.  This bookkeeping is transient: prediction
and reduction clear it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from math import comb, factorial
from pathlib import Path

import numpy as np

from .gaussian import Gaussian, GaussianMixture

__all__ = [
    "BernoulliComponent",
    "GlobalHypothesis",
    "LocalHypothesis",
    "PMBDensity",
    "PMBMDensity",
    "count_assignments",
    "evaluate_set_density",
    "load_pmb",
    "pmb_from_dict",
    "pmb_to_dict",
    "pmb_to_pmbm",
    "pmbm_to_dict",
    "save_pmb",
    "validate",
]


@dataclass(frozen=True, eq=False)
class BernoulliComponent:
    """Potential object with existence probability ``r`` and state density.

    The state density is restricted to a single Gaussian; operations that
    would produce a Bernoulli with a mixture density moment-match it.
    """

    r: float
    density: Gaussian

    def __post_init__(self) -> None:
        if not (0.0 <= self.r <= 1.0):
            raise ValueError(f"existence probability {self.r} outside [0, 1]")


@dataclass(frozen=True, eq=False)
class PMBDensity:
    """PPP intensity plus independent Bernoulli components."""

    ppp: GaussianMixture
    bernoullis: tuple[BernoulliComponent, ...] = ()

    @property
    def dim(self) -> int | None:
        if self.bernoullis:
            return self.bernoullis[0].density.dim
        return self.ppp.dim


@dataclass(frozen=True, eq=False)
class LocalHypothesis:
    """One hypothesis about a single track.

    ``weight`` is the likelihood factor this hypothesis contributed in the
    event (update or fusion) that created it; global weights carry the
    accumulated products, so local weights are per-event and never chained.
    ``assigned`` is the index of the measurement or fusion-partner component
    this hypothesis claims, or None.
    """

    weight: float
    bernoulli: BernoulliComponent
    assigned: int | None = None

    def __post_init__(self) -> None:
        if not (self.weight >= 0.0 and math.isfinite(self.weight)):
            raise ValueError("local hypothesis weight must be finite and non-negative")


@dataclass(frozen=True, eq=False)
class GlobalHypothesis:
    """Weight plus one local-hypothesis index per track."""

    weight: float
    local_indices: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "local_indices", tuple(int(i) for i in self.local_indices))
        if not (0.0 <= self.weight <= 1.0 + 1e-9):
            raise ValueError(f"global hypothesis weight {self.weight} outside [0, 1]")


@dataclass(frozen=True, eq=False)
class PMBMDensity:
    """Track-oriented PMBM: PPP intensity, per-track hypothesis lists and
    weighted global hypotheses.

    ``n_partners`` is the number of measurements (or partner components) of
    the most recent update or fusion event, and is zero whenever that
    bookkeeping has been cleared.
    """

    ppp: GaussianMixture
    tracks: tuple[tuple[LocalHypothesis, ...], ...] = ()
    globals_: tuple[GlobalHypothesis, ...] = (GlobalHypothesis(1.0, ()),)
    n_partners: int = 0

    @property
    def dim(self) -> int | None:
        for hyps in self.tracks:
            for h in hyps:
                return h.bernoulli.density.dim
        return self.ppp.dim

    def argmax_global(self) -> GlobalHypothesis:
        return max(self.globals_, key=lambda g: g.weight)


def count_assignments(n1: int, n2: int) -> int:
    """Number of ways to pair two component sets, allowing unpaired entries.

    Equals sum_p p! C(n1, p) C(n2, p) over pairing sizes p.  Exact integer
    arithmetic; grows combinatorially (34 for n1 = n2 = 3).
    """
    if n1 < 0 or n2 < 0:
        raise ValueError("component counts must be non-negative")
    return sum(
        factorial(p) * comb(n1, p) * comb(n2, p) for p in range(min(n1, n2) + 1)
    )


def pmb_to_pmbm(pmb: PMBDensity) -> PMBMDensity:
    """Wrap a PMB as a PMBM with one local hypothesis per track and a single
    global of weight one."""
    tracks = tuple((LocalHypothesis(1.0, b),) for b in pmb.bernoullis)
    globals_ = (GlobalHypothesis(1.0, (0,) * len(tracks)),)
    return PMBMDensity(pmb.ppp, tracks, globals_)


def validate(pmbm: PMBMDensity) -> list[str]:
    """Check structural invariants; returns a list of violation messages
    (empty when the density is well-formed).

    Checks: positive finite PPP weights, consistent dimensions, hypothesis
    lists non-empty with existence probabilities in [0, 1], global weights
    normalised, index vectors in range, and, when partner bookkeeping is
    present, that every partner index is claimed exactly once per global.
    """
    errors: list[str] = []
    dims = set()
    for w, g in pmbm.ppp.components:
        if not (w > 0.0 and math.isfinite(w)):
            errors.append(f"ppp component weight {w} not positive and finite")
        dims.add(g.dim)
    for i, hyps in enumerate(pmbm.tracks):
        if not hyps:
            errors.append(f"track {i} has no local hypotheses")
        for k, h in enumerate(hyps):
            if not (h.weight >= 0.0 and math.isfinite(h.weight)):
                errors.append(f"track {i} hypothesis {k} weight {h.weight} invalid")
            if not (0.0 <= h.bernoulli.r <= 1.0):
                errors.append(f"track {i} hypothesis {k} existence {h.bernoulli.r} invalid")
            dims.add(h.bernoulli.density.dim)
    if len(dims) > 1:
        errors.append(f"inconsistent state dimensions {sorted(dims)}")
    if not pmbm.globals_:
        errors.append("no global hypotheses")
    total = float(sum(g.weight for g in pmbm.globals_))
    if pmbm.globals_ and abs(total - 1.0) > 1e-9:
        errors.append(f"global weights sum to {total}, expected 1")
    for a, g in enumerate(pmbm.globals_):
        if len(g.local_indices) != len(pmbm.tracks):
            errors.append(f"global {a} selects {len(g.local_indices)} tracks, expected {len(pmbm.tracks)}")
            continue
        claimed: list[int] = []
        for i, k in enumerate(g.local_indices):
            if not (0 <= k < len(pmbm.tracks[i])):
                errors.append(f"global {a} selects missing hypothesis {k} on track {i}")
                continue
            assigned = pmbm.tracks[i][k].assigned
            if assigned is not None:
                claimed.append(assigned)
        if len(claimed) != len(set(claimed)):
            errors.append(f"global {a} claims a partner more than once")
        if pmbm.n_partners and set(claimed) != set(range(pmbm.n_partners)):
            errors.append(
                f"global {a} claims partners {sorted(set(claimed))}, "
                f"expected all of 0..{pmbm.n_partners - 1}"
            )
    return errors


def _mb_set_value(miss: list[float], rp: list[list[float]], ppp_row: list[float]) -> float:
    """Multi-Bernoulli-plus-PPP density value from precomputed tables.

    miss[i] = 1 - r_i, rp[i][j] = r_i * p_i(x_j), ppp_row[j] = lambda(x_j).
    Sums over all ways to attribute each point either to the PPP or to a
    distinct Bernoulli component, recursing over components with a bitmask
    of the points still unattributed.
    """
    n = len(ppp_row)
    memo: dict[tuple[int, int], float] = {}

    def rec(i: int, mask: int) -> float:
        if i == len(miss):
            value = 1.0
            for j in range(n):
                if mask >> j & 1:
                    value *= ppp_row[j]
            return value
        key = (i, mask)
        cached = memo.get(key)
        if cached is not None:
            return cached
        value = miss[i] * rec(i + 1, mask)
        row = rp[i]
        for j in range(n):
            if mask >> j & 1:
                value += row[j] * rec(i + 1, mask & ~(1 << j))
        memo[key] = value
        return value

    return rec(0, (1 << n) - 1)


def evaluate_set_density(density: PMBDensity | PMBMDensity, points: np.ndarray) -> float:
    """Evaluate the (normalised) multi-object density at a finite set.

    ``points`` is an (n, dim) array, n at most 6; the PPP normalising factor
    exp(-integral of the intensity) is included.  Cost grows exponentially
    with n, which is fine for the small oracle comparisons this exists for.
    """
    pmbm = pmb_to_pmbm(density) if isinstance(density, PMBDensity) else density
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points.reshape(0, points.size) if points.size == 0 else points.reshape(1, -1)
    if points.shape[0] > 6:
        raise ValueError("set density evaluation is limited to sets of at most 6 points")
    xs = [points[i] for i in range(points.shape[0])]
    ppp_row = [pmbm.ppp.evaluate(x) for x in xs]
    pdf_rows: dict[tuple[int, int], list[float]] = {}
    value = 0.0
    for g in pmbm.globals_:
        miss = []
        rp = []
        for i, k in enumerate(g.local_indices):
            bern = pmbm.tracks[i][k].bernoulli
            row = pdf_rows.get((i, k))
            if row is None:
                row = pdf_rows[(i, k)] = [bern.density.pdf(x) for x in xs]
            miss.append(1.0 - bern.r)
            rp.append([bern.r * v for v in row])
        value += g.weight * _mb_set_value(miss, rp, ppp_row)
    return math.exp(-pmbm.ppp.total_weight) * value


# --- serialisation ---------------------------------------------------------


def pmb_to_dict(pmb: PMBDensity) -> dict:
    return {
        "ppp": [
            {"weight": w, "mean": g.mean.tolist(), "cov": g.cov.tolist()}
            for w, g in pmb.ppp.components
        ],
        "bernoullis": [
            {"r": b.r, "mean": b.density.mean.tolist(), "cov": b.density.cov.tolist()}
            for b in pmb.bernoullis
        ],
    }


def pmb_from_dict(data: dict) -> PMBDensity:
    try:
        ppp = GaussianMixture(
            tuple((c["weight"], Gaussian(c["mean"], c["cov"])) for c in data["ppp"])
        )
        berns = tuple(
            BernoulliComponent(c["r"], Gaussian(c["mean"], c["cov"]))
            for c in data["bernoullis"]
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed PMB document: {exc}") from exc
    return PMBDensity(ppp, berns)


def save_pmb(path: str | Path, pmb: PMBDensity) -> None:
    Path(path).write_text(json.dumps(pmb_to_dict(pmb), indent=2) + "\n")


def load_pmb(path: str | Path) -> PMBDensity:
    return pmb_from_dict(json.loads(Path(path).read_text()))


def pmbm_to_dict(pmbm: PMBMDensity) -> dict:
    return {
        "ppp": [
            {"weight": w, "mean": g.mean.tolist(), "cov": g.cov.tolist()}
            for w, g in pmbm.ppp.components
        ],
        "tracks": [
            [
                {
                    "weight": h.weight,
                    "r": h.bernoulli.r,
                    "mean": h.bernoulli.density.mean.tolist(),
                    "cov": h.bernoulli.density.cov.tolist(),
                    "assigned": h.assigned,
                }
                for h in hyps
            ]
            for hyps in pmbm.tracks
        ],
        "globals": [
            {"weight": g.weight, "local_indices": list(g.local_indices)}
            for g in pmbm.globals_
        ],
        "n_partners": pmbm.n_partners,
    }
