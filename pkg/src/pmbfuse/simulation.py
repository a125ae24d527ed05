"""Two-agent tracking scenario: ground truth, synthetic measurements,
filter variants and Monte Carlo aggregation.

The scenario couples two sensors observing the same surveillance region.
Distributed variants run one filter per agent and periodically exchange and
fuse their posteriors; the centralised reference processes both sensors in
a single filter.  Variants are named by the density each agent carries and
the fusion rule: "dpmb-to" and "dpmb-gnn" carry a PMB (track-oriented or
best-hypothesis projection after every update), "dpmbm" carries the full
mixture and projects only when fusing, "cpmbm" is the centralised filter.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .filtering import (
    FilterParams,
    MeasurementModel,
    MotionModel,
    estimate,
    ncv_motion_model,
    predict,
    project_to_pmb_gnn,
    project_to_pmb_to,
    reduce,
    update,
)
from .fusion import FusionParams, fuse_aa, fuse_gci
from .gaussian import GaussianMixture
from .gospa import GospaParams, GospaResult, gospa, rms_gospa
from .rfs import PMBMDensity, pmb_to_pmbm

__all__ = [
    "GroundTruth",
    "MonteCarloResult",
    "RunResult",
    "ScenarioConfig",
    "TruthObject",
    "VARIANTS",
    "default_motion_model",
    "default_measurement_model",
    "generate_measurements",
    "generate_truth",
    "monte_carlo",
    "run_centralized",
    "run_distributed",
    "summary_dict",
]

VARIANTS = ("cpmbm", "dpmb-to", "dpmb-gnn", "dpmbm")
RULES = ("gci", "aa")

_TRUTH_STREAM = 0
_MEASUREMENT_STREAM = 1


def default_motion_model() -> MotionModel:
    return ncv_motion_model(
        tau=1.0,
        accel_noise=0.01,
        survival_prob=0.99,
        birth_mean=[100.0, 0.0, 100.0, 0.0],
        birth_cov=np.diag([150.0**2, 1.0, 150.0**2, 1.0]),
        birth_expected_first=3.0,
        birth_expected_rest=0.005,
    )


def default_measurement_model() -> MeasurementModel:
    return MeasurementModel(
        observation=np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]]),
        noise=4.0 * np.eye(2),
        detection_prob=0.9,
        clutter_rate=10.0,
        region=((0.0, 300.0), (0.0, 300.0)),
    )


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything a Monte Carlo experiment needs.

    ``variant`` is one of :data:`VARIANTS`; ``rule`` picks the fusion rule
    for the distributed variants and is ignored by "cpmbm".  ``aa_gate`` is
    the squared-Mahalanobis association gate of the arithmetic rule.
    """

    variant: str = "dpmb-to"
    rule: str = "gci"
    steps: int = 81
    n_runs: int = 100
    n_agents: int = 2
    seed: int = 1
    fusion_period: int = 5
    truth_mode: str = "scripted"
    motion: MotionModel = field(default_factory=default_motion_model)
    measurement: MeasurementModel = field(default_factory=default_measurement_model)
    filter_params: FilterParams = field(default_factory=FilterParams)
    fusion_params: FusionParams = field(default_factory=lambda: FusionParams(0.5, 20.0, 200))
    aa_gate: float = 25.0
    gospa_params: GospaParams = field(default_factory=GospaParams)

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.rule not in RULES:
            raise ValueError(f"unknown fusion rule {self.rule!r}")
        if self.truth_mode not in ("scripted", "sampled"):
            raise ValueError(f"unknown truth mode {self.truth_mode!r}")
        if self.variant != "cpmbm" and self.n_agents != 2:
            raise ValueError("distributed variants are defined for exactly 2 agents")
        if self.steps < 1 or self.n_runs < 1 or self.fusion_period < 1:
            raise ValueError("steps, n_runs and fusion_period must be positive")

    @property
    def label(self) -> str:
        return "cpmbm" if self.variant == "cpmbm" else f"{self.variant}-{self.rule}"


@dataclass(frozen=True)
class TruthObject:
    """One object: first step alive (1-based) and its state per step."""

    birth: int
    states: np.ndarray

    @property
    def death(self) -> int:
        """First step the object is no longer alive."""
        return self.birth + self.states.shape[0]

    def state_at(self, step: int) -> np.ndarray | None:
        if self.birth <= step < self.death:
            return self.states[step - self.birth]
        return None


@dataclass(frozen=True)
class GroundTruth:
    objects: tuple[TruthObject, ...]
    steps: int

    def states_at(self, step: int) -> np.ndarray:
        states = [o.state_at(step) for o in self.objects]
        states = [s for s in states if s is not None]
        dim = self.objects[0].states.shape[1] if self.objects else 0
        return np.stack(states) if states else np.empty((0, dim))


def _rng(seed: int, *path: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, *path]))


def _scripted_truth(steps: int) -> GroundTruth:
    # Four objects on crossing constant-velocity legs: born in the corners of
    # the region, passing within a few units of the centre at step 40; the
    # third object dies there.
    starts = [(50.0, 50.0), (250.0, 50.0), (50.0, 250.0), (250.0, 250.0)]
    nears = [(148.0, 148.0), (152.0, 148.0), (148.0, 152.0), (152.0, 152.0)]
    lifetimes = [steps, steps, min(40, steps), steps]
    objects = []
    for (sx, sy), (tx, ty), last in zip(starts, nears, lifetimes):
        vx, vy = (tx - sx) / 39.0, (ty - sy) / 39.0
        ks = np.arange(last)
        states = np.column_stack(
            [sx + vx * ks, np.full(last, vx), sy + vy * ks, np.full(last, vy)]
        )
        objects.append(TruthObject(1, states))
    return GroundTruth(tuple(objects), steps)


def _sampled_truth(cfg: ScenarioConfig) -> GroundTruth:
    rng = _rng(cfg.seed, _TRUTH_STREAM)
    motion = cfg.motion
    F, Q = motion.transition, motion.process_noise
    dim = F.shape[0]
    chol_q = np.linalg.cholesky(Q + 1e-12 * np.eye(dim))
    birth_w = motion.birth_intensity.weights()
    birth_w = birth_w / birth_w.sum()
    objects = []
    for step in range(1, cfg.steps + 1):
        for _ in range(rng.poisson(motion.expected_births(step))):
            comp = rng.choice(len(birth_w), p=birth_w)
            g = motion.birth_intensity.components[comp][1]
            x = rng.multivariate_normal(g.mean, g.cov)
            states = [x]
            for _k in range(step + 1, cfg.steps + 1):
                if rng.uniform() > motion.survival_prob:
                    break
                x = F @ x + chol_q @ rng.standard_normal(dim)
                states.append(x)
            objects.append(TruthObject(step, np.array(states)))
    return GroundTruth(tuple(objects), cfg.steps)


def generate_truth(cfg: ScenarioConfig) -> GroundTruth:
    """Ground truth for the configured scenario; deterministic in the seed."""
    if cfg.truth_mode == "scripted":
        return _scripted_truth(cfg.steps)
    return _sampled_truth(cfg)


def generate_measurements(
    truth: GroundTruth, mm: MeasurementModel, rng: np.random.Generator
) -> list[np.ndarray]:
    """One scan per step: detections of alive objects (probability
    ``detection_prob``, Gaussian noise) followed by uniform Poisson clutter."""
    H, R = mm.observation, mm.noise
    dz = H.shape[0]
    chol_r = np.linalg.cholesky(R)
    lows = np.array([lo for lo, _ in mm.region])
    highs = np.array([hi for _, hi in mm.region])
    scans = []
    for step in range(1, truth.steps + 1):
        states = truth.states_at(step)
        rows = []
        for x in states:
            if rng.uniform() < mm.detection_prob:
                rows.append(H @ x + chol_r @ rng.standard_normal(dz))
        n_clutter = rng.poisson(mm.clutter_rate)
        clutter = lows + (highs - lows) * rng.uniform(size=(n_clutter, dz))
        scan = np.vstack(rows + [clutter]) if rows else clutter
        scans.append(scan)
    return scans


@dataclass(frozen=True)
class RunResult:
    """Per-step GOSPA results of one Monte Carlo run, one row per agent
    (the centralised filter produces a single row)."""

    label: str
    run: int
    gospa: tuple[tuple[GospaResult, ...], ...]
    wall_clock: float


def _positions(states: np.ndarray, H: np.ndarray) -> np.ndarray:
    if states.shape[0] == 0:
        return np.empty((0, H.shape[0]))
    return states @ H.T


def _to_pmb(state: PMBMDensity, variant: str):
    if variant == "dpmb-to":
        return project_to_pmb_to(state)
    return project_to_pmb_gnn(state)


def run_distributed(
    cfg: ScenarioConfig,
    truth: GroundTruth,
    scans: list[list[np.ndarray]],
    run: int = 0,
) -> RunResult:
    """One run of a distributed variant: per-agent filtering with periodic
    fusion, both agents adopting the fused posterior."""
    start = time.perf_counter()
    fp, mm = cfg.filter_params, cfg.measurement
    H = mm.observation
    cost_gap = -math.log(fp.mb_prune) if fp.mb_prune > 0.0 else None
    states = [PMBMDensity(GaussianMixture()) for _ in range(cfg.n_agents)]
    results: list[list[GospaResult]] = [[] for _ in range(cfg.n_agents)]
    for step in range(1, cfg.steps + 1):
        for a in range(cfg.n_agents):
            s = predict(states[a], cfg.motion, step)
            s = update(s, scans[a][step - 1], mm, fp)
            s = reduce(s, fp)
            if cfg.variant in ("dpmb-to", "dpmb-gnn"):
                s = pmb_to_pmbm(_to_pmb(s, cfg.variant))
            states[a] = s
        if step % cfg.fusion_period == 0:
            pmbs = [_to_pmb(states[a], cfg.variant) for a in range(2)]
            if cfg.rule == "gci":
                fused = fuse_gci(
                    pmbs[0], pmbs[1], cfg.fusion_params, fp, cost_gap=cost_gap
                )
            else:
                aa_params = FusionParams(cfg.fusion_params.omega, cfg.aa_gate, 1)
                fused = pmb_to_pmbm(fuse_aa(pmbs[0], pmbs[1], aa_params))
            fused = reduce(fused, fp)
            if cfg.variant in ("dpmb-to", "dpmb-gnn"):
                fused = pmb_to_pmbm(_to_pmb(fused, cfg.variant))
            states = [fused for _ in range(cfg.n_agents)]
        truth_pos = _positions(truth.states_at(step), H)
        for a in range(cfg.n_agents):
            est_pos = _positions(estimate(states[a]), H)
            results[a].append(gospa(truth_pos, est_pos, cfg.gospa_params))
    elapsed = time.perf_counter() - start
    return RunResult(cfg.label, run, tuple(tuple(r) for r in results), elapsed)


def run_centralized(
    cfg: ScenarioConfig,
    truth: GroundTruth,
    scans: list[list[np.ndarray]],
    run: int = 0,
) -> RunResult:
    """One run of the centralised reference: a single filter updated with
    every agent's scan in turn at each step."""
    start = time.perf_counter()
    fp, mm = cfg.filter_params, cfg.measurement
    H = mm.observation
    state = PMBMDensity(GaussianMixture())
    results: list[GospaResult] = []
    for step in range(1, cfg.steps + 1):
        state = predict(state, cfg.motion, step)
        for a in range(len(scans)):
            state = update(state, scans[a][step - 1], mm, fp)
            state = reduce(state, fp)
        truth_pos = _positions(truth.states_at(step), H)
        est_pos = _positions(estimate(state), H)
        results.append(gospa(truth_pos, est_pos, cfg.gospa_params))
    elapsed = time.perf_counter() - start
    return RunResult(cfg.label, run, (tuple(results),), elapsed)


def _single_run(cfg: ScenarioConfig, truth: GroundTruth, run: int) -> RunResult:
    scans = [
        generate_measurements(
            truth, cfg.measurement, _rng(cfg.seed, _MEASUREMENT_STREAM, run, agent)
        )
        for agent in range(cfg.n_agents)
    ]
    if cfg.variant == "cpmbm":
        return run_centralized(cfg, truth, scans, run)
    return run_distributed(cfg, truth, scans, run)


@dataclass(frozen=True)
class MonteCarloResult:
    config: ScenarioConfig
    runs: tuple[RunResult, ...]
    per_step: dict[str, np.ndarray]
    overall: float


def monte_carlo(cfg: ScenarioConfig, jobs: int = 1, progress=None) -> MonteCarloResult:
    """Run ``cfg.n_runs`` independent runs and aggregate RMS GOSPA.

    Measurement randomness is derived per (seed, run, agent), so results do
    not depend on ``jobs``; ``progress`` is an optional callback invoked
    with each finished :class:`RunResult`.
    """
    truth = generate_truth(cfg)
    runs: list[RunResult] = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_single_run, cfg, truth, r) for r in range(cfg.n_runs)]
            for future in futures:
                runs.append(future.result())
                if progress:
                    progress(runs[-1])
    else:
        for r in range(cfg.n_runs):
            runs.append(_single_run(cfg, truth, r))
            if progress:
                progress(runs[-1])
    rows = [row for result in runs for row in result.gospa]
    per_step_total, overall = rms_gospa(rows)
    per_step = {"total": per_step_total}
    for name in ("localisation", "missed", "false"):
        values = np.array([[getattr(g, name) for g in row] for row in rows])
        per_step[name] = np.sqrt(np.mean(values, axis=0))
    return MonteCarloResult(cfg, tuple(runs), per_step, overall)


def summary_dict(mc: MonteCarloResult) -> dict:
    """JSON-ready summary of one Monte Carlo experiment (no timing data, so
    identical configurations produce identical documents)."""
    cfg = mc.config
    return {
        "label": cfg.label,
        "variant": cfg.variant,
        "rule": None if cfg.variant == "cpmbm" else cfg.rule,
        "steps": cfg.steps,
        "runs": cfg.n_runs,
        "seed": cfg.seed,
        "fusion_period": None if cfg.variant == "cpmbm" else cfg.fusion_period,
        "omega": None if cfg.variant == "cpmbm" else cfg.fusion_params.omega,
        "overall_rms_gospa": mc.overall,
        "per_step": {key: [float(v) for v in arr] for key, arr in mc.per_step.items()},
    }
