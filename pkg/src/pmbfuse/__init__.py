"""Distributed Poisson multi-Bernoulli filtering with GCI fusion.

Multi-object tracking building blocks: Gaussian/mixture primitives, PMB and
PMBM density types, k-best assignment, a point-target PMBM filter, fusion of
PMB densities by geometric (generalised covariance intersection) and
arithmetic averaging, the GOSPA metric, and a two-agent Monte Carlo
simulation harness with a command-line front end.
"""

from .assignment import AssignmentProblem, best_assignment, murty_kbest
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
from .fusion import (
    FusionParams,
    fuse_aa,
    fuse_bernoulli_bernoulli,
    fuse_bernoulli_ppp,
    fuse_gci,
    fuse_ppp,
    log_power_scale,
    pmb_power_approx,
)
from .gaussian import (
    Gaussian,
    GaussianMixture,
    ScaledGaussian,
    gaussian_power,
    gaussian_product,
    kappa,
    mahalanobis_sq,
    mixture_power,
    mixture_product,
    moment_match,
    prune_merge_mixture,
)
from .gospa import GospaParams, GospaResult, gospa, rms_gospa
from .rfs import (
    BernoulliComponent,
    GlobalHypothesis,
    LocalHypothesis,
    PMBDensity,
    PMBMDensity,
    count_assignments,
    evaluate_set_density,
    load_pmb,
    pmb_from_dict,
    pmb_to_dict,
    pmb_to_pmbm,
    pmbm_to_dict,
    save_pmb,
    validate,
)
from .simulation import (
    GroundTruth,
    MonteCarloResult,
    RunResult,
    ScenarioConfig,
    TruthObject,
    generate_measurements,
    generate_truth,
    monte_carlo,
    run_centralized,
    run_distributed,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
