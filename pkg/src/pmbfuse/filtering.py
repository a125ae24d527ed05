"""Point-target PMBM filter: prediction, measurement update, reduction,
estimation and projections back to a PMB.

The update is track-oriented.  Each track keeps a list of local hypotheses;
a measurement update turns every referenced local hypothesis into a
missed-detection child plus one child per gated measurement, spawns a new
track for every measurement (fed by the Poisson intensity and clutter), and
enumerates child global hypotheses with Murty's algorithm on the
negative-log weight assignment problem of each prior global.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .assignment import UNASSIGNED, AssignmentProblem, best_assignment, murty_kbest
from .gaussian import Gaussian, GaussianMixture, moment_match, prune_merge_mixture
from .rfs import (
    BernoulliComponent,
    GlobalHypothesis,
    LocalHypothesis,
    PMBDensity,
    PMBMDensity,
)

__all__ = [
    "FilterParams",
    "MeasurementModel",
    "MotionModel",
    "estimate",
    "ncv_motion_model",
    "predict",
    "project_to_pmb_gnn",
    "project_to_pmb_to",
    "reduce",
    "update",
]

# Floor for logarithms of vanishing likelihood factors: keeps impossible
# associations representable (and strongly dominated) in cost space instead
# of producing -inf arithmetic.
_LOG_FLOOR = -700.0


def _safe_log(x: float) -> float:
    return math.log(x) if x > 1e-300 else _LOG_FLOOR


@dataclass(frozen=True, eq=False)
class MotionModel:
    """Linear-Gaussian motion with survival and a Poisson birth process.

    ``birth_intensity`` holds the birth shape (weights normally summing to
    one); the effective birth intensity at step k is ``expected_births(k)``
    times that shape.  ``birth_expected_first`` applies at step 1,
    ``birth_expected_rest`` at every later step.
    """

    transition: np.ndarray
    process_noise: np.ndarray
    survival_prob: float
    birth_intensity: GaussianMixture
    birth_expected_first: float
    birth_expected_rest: float

    def __post_init__(self) -> None:
        F = np.atleast_2d(np.asarray(self.transition, dtype=float))
        Q = np.atleast_2d(np.asarray(self.process_noise, dtype=float))
        if F.shape[0] != F.shape[1] or Q.shape != F.shape:
            raise ValueError("transition and process noise must be square and matched")
        if not (0.0 <= self.survival_prob <= 1.0):
            raise ValueError("survival probability outside [0, 1]")
        if min(self.birth_expected_first, self.birth_expected_rest) < 0.0:
            raise ValueError("expected birth counts must be non-negative")
        F.setflags(write=False)
        Q.setflags(write=False)
        object.__setattr__(self, "transition", F)
        object.__setattr__(self, "process_noise", Q)

    def expected_births(self, step: int) -> float:
        return self.birth_expected_first if step == 1 else self.birth_expected_rest

    def propagate(self, g: Gaussian) -> Gaussian:
        F, Q = self.transition, self.process_noise
        cov = F @ g.cov @ F.T + Q
        return Gaussian.unchecked(F @ g.mean, 0.5 * (cov + cov.T))


def ncv_motion_model(
    tau: float,
    accel_noise: float,
    survival_prob: float,
    birth_mean,
    birth_cov,
    birth_expected_first: float,
    birth_expected_rest: float,
) -> MotionModel:
    """Nearly-constant-velocity model on the plane, state [px, vx, py, vy].

    Per axis: F = [[1, tau], [0, 1]] and Q = accel_noise *
    [[tau^3/3, tau^2/2], [tau^2/2, tau]].
    """
    f_axis = np.array([[1.0, tau], [0.0, 1.0]])
    q_axis = accel_noise * np.array(
        [[tau**3 / 3.0, tau**2 / 2.0], [tau**2 / 2.0, tau]]
    )
    F = np.kron(np.eye(2), f_axis)
    Q = np.kron(np.eye(2), q_axis)
    birth = GaussianMixture(((1.0, Gaussian(birth_mean, birth_cov)),))
    return MotionModel(F, Q, survival_prob, birth, birth_expected_first, birth_expected_rest)


@dataclass(frozen=True, eq=False)
class MeasurementModel:
    """Linear-Gaussian detections with uniform Poisson clutter.

    ``region`` is a tuple of (low, high) bounds per measurement dimension;
    clutter is uniform over it with Poisson-distributed count per scan.
    """

    observation: np.ndarray
    noise: np.ndarray
    detection_prob: float
    clutter_rate: float
    region: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        H = np.atleast_2d(np.asarray(self.observation, dtype=float))
        R = np.atleast_2d(np.asarray(self.noise, dtype=float))
        region = tuple((float(lo), float(hi)) for lo, hi in self.region)
        if R.shape != (H.shape[0], H.shape[0]):
            raise ValueError("noise covariance does not match measurement dimension")
        if len(region) != H.shape[0]:
            raise ValueError("region does not match measurement dimension")
        if not (0.0 <= self.detection_prob <= 1.0):
            raise ValueError("detection probability outside [0, 1]")
        if self.clutter_rate < 0.0 or any(hi <= lo for lo, hi in region):
            raise ValueError("invalid clutter parameters")
        H.setflags(write=False)
        R.setflags(write=False)
        object.__setattr__(self, "observation", H)
        object.__setattr__(self, "noise", R)
        object.__setattr__(self, "region", region)

    @property
    def area(self) -> float:
        out = 1.0
        for lo, hi in self.region:
            out *= hi - lo
        return out

    def clutter_intensity(self, z: np.ndarray) -> float:
        inside = all(lo <= zi <= hi for zi, (lo, hi) in zip(z, self.region))
        return self.clutter_rate / self.area if inside else 0.0


@dataclass(frozen=True)
class FilterParams:
    """Reduction thresholds and association budgets.

    ``gate`` is a squared-Mahalanobis gate; ``murty_k`` bounds the number of
    child global hypotheses, shared across prior globals in proportion to
    their weights.
    """

    ppp_prune: float = 1e-5
    ppp_merge: float = 0.1
    ppp_max: int = 30
    mb_prune: float = 1e-4
    bern_exist_prune: float = 1e-5
    gate: float = 20.0
    murty_k: int = 200

    def __post_init__(self) -> None:
        if self.murty_k < 1 or self.ppp_max < 1:
            raise ValueError("murty_k and ppp_max must be at least 1")
        if self.gate <= 0.0:
            raise ValueError("gate must be positive")
        for name in ("ppp_prune", "ppp_merge", "mb_prune", "bern_exist_prune"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative")


def predict(pmbm: PMBMDensity, motion: MotionModel, step: int) -> PMBMDensity:
    """Prediction through the motion model to time ``step``.

    The PPP is thinned by survival, propagated and augmented with the birth
    intensity for ``step``; every Bernoulli is thinned and propagated.
    Global hypothesis weights are unchanged; association bookkeeping from a
    previous update is cleared.
    """
    ps = motion.survival_prob
    ppp_comps = [(w * ps, motion.propagate(g)) for w, g in pmbm.ppp.components if w * ps > 0.0]
    expected = motion.expected_births(step)
    if expected > 0.0:
        ppp_comps += [(w * expected, g) for w, g in motion.birth_intensity.components]
    tracks = tuple(
        tuple(
            LocalHypothesis(
                1.0,
                BernoulliComponent(ps * h.bernoulli.r, motion.propagate(h.bernoulli.density)),
            )
            for h in hyps
        )
        for hyps in pmbm.tracks
    )
    return PMBMDensity(GaussianMixture(tuple(ppp_comps)), tracks, pmbm.globals_, 0)


def _detection_children(
    bern: BernoulliComponent,
    Z: np.ndarray,
    mm: MeasurementModel,
    gate: float,
) -> tuple[float, BernoulliComponent, dict[int, tuple[float, BernoulliComponent]]]:
    """Missed-detection child and gated detection children of one Bernoulli.

    Returns (log missed factor, missed Bernoulli, {j: (log factor, child)}).
    """
    pd = mm.detection_prob
    r, g = bern.r, bern.density
    if r == 0.0:
        return 0.0, bern, {}
    log_miss = _safe_log(1.0 - r * pd)
    r_miss = r * (1.0 - pd) / (1.0 - r * pd) if r * pd < 1.0 else 0.0
    missed = BernoulliComponent(r_miss, g)
    children: dict[int, tuple[float, BernoulliComponent]] = {}
    if Z.shape[0] == 0 or pd == 0.0:
        return log_miss, missed, children
    H, R = mm.observation, mm.noise
    z_hat = H @ g.mean
    S = H @ g.cov @ H.T + R
    S = 0.5 * (S + S.T)
    L = np.linalg.cholesky(S)
    y = np.linalg.solve(L, (Z - z_hat).T)
    dist = np.einsum("ij,ij->j", y, y)
    logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
    dz = Z.shape[1]
    K = np.linalg.solve(S, H @ g.cov).T
    joseph = np.eye(g.dim) - K @ H
    cov = joseph @ g.cov @ joseph.T + K @ R @ K.T
    cov = 0.5 * (cov + cov.T)
    for j in np.flatnonzero(dist < gate):
        loglik = -0.5 * (dist[j] + logdet + dz * math.log(2.0 * math.pi))
        factor = _safe_log(r * pd) + loglik
        mean = g.mean + K @ (Z[j] - z_hat)
        children[int(j)] = (
            factor,
            BernoulliComponent(1.0, Gaussian.unchecked(mean, cov)),
        )
    return log_miss, missed, children


def _lift_measurement(z: np.ndarray, mm: MeasurementModel, dim: int) -> Gaussian:
    """State-space placeholder density for a measurement nothing explains:
    pseudo-inverse lift of the measurement, huge variance on unobserved
    directions."""
    H = mm.observation
    pinv = np.linalg.pinv(H)
    mean = pinv @ z
    cov = pinv @ mm.noise @ pinv.T + 1e6 * (np.eye(dim) - pinv @ H)
    return Gaussian(mean, 0.5 * (cov + cov.T))


def _new_tracks(
    ppp: GaussianMixture,
    Z: np.ndarray,
    mm: MeasurementModel,
    gate: float,
    dim: int,
) -> tuple[list[float], list[BernoulliComponent]]:
    """Per measurement: birth factor rho (clutter plus detected-PPP mass)
    and the Bernoulli of the newly created track."""
    pd = mm.detection_prob
    m = Z.shape[0]
    hits: list[list[tuple[float, Gaussian]]] = [[] for _ in range(m)]
    if pd > 0.0:
        H, R = mm.observation, mm.noise
        dz = Z.shape[1]
        for w, g in ppp.components:
            z_hat = H @ g.mean
            S = 0.5 * ((H @ g.cov @ H.T + R) + (H @ g.cov @ H.T + R).T)
            L = np.linalg.cholesky(S)
            y = np.linalg.solve(L, (Z - z_hat).T)
            dist = np.einsum("ij,ij->j", y, y)
            logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
            K = np.linalg.solve(S, H @ g.cov).T
            joseph = np.eye(g.dim) - K @ H
            cov = joseph @ g.cov @ joseph.T + K @ R @ K.T
            cov = 0.5 * (cov + cov.T)
            for j in np.flatnonzero(dist < gate):
                lik = math.exp(-0.5 * (dist[j] + logdet + dz * math.log(2.0 * math.pi)))
                mean = g.mean + K @ (Z[j] - z_hat)
                hits[j].append((w * pd * lik, Gaussian.unchecked(mean, cov)))
    rho: list[float] = []
    berns: list[BernoulliComponent] = []
    for j in range(m):
        clutter = mm.clutter_intensity(Z[j])
        detected = float(sum(w for w, _ in hits[j]))
        rho_j = clutter + detected
        if detected > 0.0:
            r = detected / rho_j
            density = hits[j][0][1] if len(hits[j]) == 1 else moment_match(hits[j])
        else:
            r = 0.0
            density = _lift_measurement(Z[j], mm, dim)
        rho.append(rho_j)
        berns.append(BernoulliComponent(r, density))
    return rho, berns


def update(
    pmbm: PMBMDensity,
    measurements,
    mm: MeasurementModel,
    fp: FilterParams,
) -> PMBMDensity:
    """Measurement update of a track-oriented PMBM.

    For every prior global hypothesis an assignment problem is built whose
    rows are its tracks (with at least one gated measurement) and whose
    columns are the measurements; pairing costs are negative log ratios of
    the detection factor against the missed factor and the new-track factor.
    Murty's algorithm enumerates children, with the ``murty_k`` budget split
    across prior globals in proportion to their weights.  Children whose
    weight relative to the best child falls below ``mb_prune`` are not
    generated, matching what reduction would discard anyway.

    Every measurement additionally spawns a new track whose two local
    hypotheses are "never existed" and "born from this measurement".  The
    PPP is thinned by the detection probability.
    """
    dim = pmbm.dim if pmbm.dim is not None else mm.observation.shape[1]
    Z = np.asarray(measurements, dtype=float)
    if Z.size == 0:
        Z = Z.reshape(0, mm.observation.shape[0])
    elif Z.ndim == 1:
        Z = Z.reshape(1, -1)
    if Z.shape[1] != mm.observation.shape[0]:
        raise ValueError("measurement dimension does not match the model")
    m = Z.shape[0]
    n = len(pmbm.tracks)

    # Children of every referenced local hypothesis.  Per track, referenced
    # parent hypotheses get a dense position so the per-prior quantities can
    # be gathered with array indexing.
    referenced: list[set[int]] = [set() for _ in range(n)]
    for g in pmbm.globals_:
        for i, k in enumerate(g.local_indices):
            referenced[i].add(k)
    pos_of: list[dict[int, int]] = [
        {k: p for p, k in enumerate(sorted(refs))} for refs in referenced
    ]
    max_pos = max((len(refs) for refs in referenced), default=1) or 1
    miss_log = np.zeros((n, max_pos))
    cost = np.full((n, max_pos, m), np.inf)
    miss_child: list[dict[int, BernoulliComponent]] = [{} for _ in range(n)]
    det_child: list[dict[int, dict[int, tuple[float, BernoulliComponent]]]] = [{} for _ in range(n)]

    rho_born, born_berns = _new_tracks(pmbm.ppp, Z, mm, fp.gate, dim)
    log_born = np.array([_safe_log(rho) for rho in rho_born])

    for i in range(n):
        for k, p in pos_of[i].items():
            log_miss, missed, children = _detection_children(
                pmbm.tracks[i][k].bernoulli, Z, mm, fp.gate
            )
            miss_log[i, p] = log_miss
            miss_child[i][k] = missed
            det_child[i][k] = children
            for j, (factor, _) in children.items():
                cost[i, p, j] = -(factor - log_miss - log_born[j])

    # One assignment problem per prior global; collect candidate children.
    log_gap = -_safe_log(fp.mb_prune) if fp.mb_prune > 0.0 else None
    track_idx = np.arange(n)
    born_total = float(log_born.sum())
    problems = []
    for g in pmbm.globals_:
        sel = np.array(
            [pos_of[i][k] for i, k in enumerate(g.local_indices)], dtype=int
        )
        pair_all = cost[track_idx, sel]
        rows = np.flatnonzero(np.isfinite(pair_all).any(axis=1)) if m else np.empty(0, dtype=int)
        base = _safe_log(g.weight) + born_total + float(miss_log[track_idx, sel].sum())
        problem = AssignmentProblem(pair_all[rows], np.zeros(len(rows)))
        problems.append((g, rows.tolist(), base, problem))

    roots = [best_assignment(problem) for _, _, _, problem in problems]
    top = max(base - cost_ for (_, _, base, _), (_, cost_) in zip(problems, roots))

    candidates: list[tuple[float, GlobalHypothesis, np.ndarray, list[int]]] = []
    for (g, rows, base, problem), (solution, cost) in zip(problems, roots):
        best = base - cost
        if log_gap is not None and top - best > log_gap:
            continue
        k_budget = max(1, math.ceil(fp.murty_k * g.weight))
        if k_budget == 1:
            candidates.append((best, g, solution, rows))
            continue
        gap = None if log_gap is None else log_gap - (top - best)
        for child, child_cost in murty_kbest(problem, k_budget, cost_gap=gap):
            candidates.append((base - child_cost, g, child, rows))

    # Assemble child tracks and globals; hypotheses are created on first
    # reference so discarded associations cost nothing.
    new_tracks: list[list[LocalHypothesis]] = [[] for _ in range(n + m)]
    index_of: dict[tuple, int] = {}
    for j in range(m):
        new_tracks[n + j] = [
            LocalHypothesis(1.0, BernoulliComponent(0.0, born_berns[j].density)),
            LocalHypothesis(math.exp(log_born[j]), born_berns[j], assigned=j),
        ]

    def miss_index(i: int, k: int) -> int:
        key = (i, k, -1)
        idx = index_of.get(key)
        if idx is None:
            weight = math.exp(miss_log[i, pos_of[i][k]])
            new_tracks[i].append(LocalHypothesis(weight, miss_child[i][k]))
            idx = index_of[key] = len(new_tracks[i]) - 1
        return idx

    def det_index(i: int, k: int, j: int) -> int:
        key = (i, k, j)
        idx = index_of.get(key)
        if idx is None:
            factor, bern = det_child[i][k][j]
            new_tracks[i].append(LocalHypothesis(math.exp(factor), bern, assigned=j))
            idx = index_of[key] = len(new_tracks[i]) - 1
        return idx

    log_weights = []
    index_vectors = []
    for log_w, g, solution, rows in candidates:
        indices = [0] * (n + m)
        row_to = {i: int(solution[a]) for a, i in enumerate(rows)}
        claimed = set()
        for i in range(n):
            k = g.local_indices[i]
            j = row_to.get(i, UNASSIGNED)
            if j == UNASSIGNED:
                indices[i] = miss_index(i, k)
            else:
                indices[i] = det_index(i, k, j)
                claimed.add(j)
        for j in range(m):
            indices[n + j] = 0 if j in claimed else 1
        log_weights.append(log_w)
        index_vectors.append(tuple(indices))

    shift = max(log_weights)
    weights = np.exp(np.array(log_weights) - shift)
    weights /= weights.sum()
    globals_ = tuple(
        GlobalHypothesis(w, iv) for w, iv in zip(weights, index_vectors)
    )
    ppp = pmbm.ppp.scaled(1.0 - mm.detection_prob)
    return PMBMDensity(ppp, tuple(tuple(t) for t in new_tracks), globals_, m)


def reduce(pmbm: PMBMDensity, fp: FilterParams) -> PMBMDensity:
    """Hypothesis reduction.

    Drops global hypotheses below ``mb_prune`` (the heaviest always
    survives), removes tracks whose existence probability is below
    ``bern_exist_prune`` under every surviving global, merges globals made
    identical by that removal, drops unreferenced local hypotheses, clears
    association bookkeeping and reduces the PPP mixture.
    """
    weights = np.array([g.weight for g in pmbm.globals_], dtype=float)
    weights /= weights.sum()
    keep = weights >= fp.mb_prune
    keep[int(np.argmax(weights))] = True
    weights = weights[keep]
    n = len(pmbm.tracks)
    index_matrix = np.array(
        [g.local_indices for a, g in enumerate(pmbm.globals_) if keep[a]], dtype=int
    ).reshape(len(weights), n)

    track_keep = []
    for i in range(n):
        r_by_hyp = np.array([h.bernoulli.r for h in pmbm.tracks[i]])
        if r_by_hyp[index_matrix[:, i]].max() >= fp.bern_exist_prune:
            track_keep.append(i)
    index_matrix = index_matrix[:, track_keep]

    # Globals made identical by the dropped tracks merge, summing weights.
    if index_matrix.shape[1]:
        unique, inverse = np.unique(index_matrix, axis=0, return_inverse=True)
        merged_w = np.zeros(unique.shape[0])
        np.add.at(merged_w, inverse.ravel(), weights)
    else:
        unique = np.zeros((1, 0), dtype=int)
        merged_w = np.array([weights.sum()])

    remap: list[dict[int, int]] = []
    tracks: list[tuple[LocalHypothesis, ...]] = []
    for pos, i in enumerate(track_keep):
        order = np.unique(unique[:, pos])
        remap.append({int(k): idx for idx, k in enumerate(order)})
        tracks.append(
            tuple(
                LocalHypothesis(1.0, pmbm.tracks[i][int(k)].bernoulli) for k in order
            )
        )

    merged_w /= merged_w.sum()
    order = np.argsort(-merged_w, kind="stable")
    globals_ = tuple(
        GlobalHypothesis(
            float(merged_w[a]),
            tuple(remap[pos][int(k)] for pos, k in enumerate(unique[a])),
        )
        for a in order
    )
    ppp = prune_merge_mixture(pmbm.ppp, fp.ppp_prune, fp.ppp_merge, fp.ppp_max)
    return PMBMDensity(ppp, tuple(tracks), globals_, 0)


def estimate(pmbm: PMBMDensity) -> np.ndarray:
    """State estimates from the heaviest global hypothesis: the means of its
    Bernoulli components with existence probability above one half."""
    g = pmbm.argmax_global()
    means = [
        pmbm.tracks[i][k].bernoulli.density.mean
        for i, k in enumerate(g.local_indices)
        if pmbm.tracks[i][k].bernoulli.r > 0.5
    ]
    dim = pmbm.dim or 0
    return np.stack(means) if means else np.empty((0, dim))


def project_to_pmb_to(pmbm: PMBMDensity) -> PMBDensity:
    """Track-oriented PMB projection.

    Per track, the marginal existence is the global-weight average of the
    selected hypotheses' existences, and the state density moment-matches
    the mixture of selected densities weighted by global weight times
    existence.  Tracks with zero marginal existence are dropped.
    """
    berns = []
    for i, hyps in enumerate(pmbm.tracks):
        by_hyp: dict[int, float] = {}
        for g in pmbm.globals_:
            k = g.local_indices[i]
            by_hyp[k] = by_hyp.get(k, 0.0) + g.weight
        r_bar = sum(w * hyps[k].bernoulli.r for k, w in by_hyp.items())
        if r_bar <= 0.0:
            continue
        mixture = [
            (w * hyps[k].bernoulli.r, hyps[k].bernoulli.density)
            for k, w in by_hyp.items()
            if w * hyps[k].bernoulli.r > 0.0
        ]
        berns.append(BernoulliComponent(min(r_bar, 1.0), moment_match(mixture)))
    return PMBDensity(pmbm.ppp, tuple(berns))


def project_to_pmb_gnn(pmbm: PMBMDensity) -> PMBDensity:
    """Best-global PMB projection: keep only the heaviest global hypothesis
    and drop its zero-existence components."""
    g = pmbm.argmax_global()
    berns = tuple(
        pmbm.tracks[i][k].bernoulli
        for i, k in enumerate(g.local_indices)
        if pmbm.tracks[i][k].bernoulli.r > 0.0
    )
    return PMBDensity(pmbm.ppp, berns)
