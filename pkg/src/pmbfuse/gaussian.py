"""Gaussian and Gaussian-mixture primitives.

Everything downstream (Bernoulli components, Poisson intensities, fusion
rules) is built from scaled Gaussians, Gaussian products and fractional
powers of Gaussians, so those operations live here in one place.  All
containers are immutable: operations return new objects and never write
into their arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Gaussian",
    "GaussianMixture",
    "ScaledGaussian",
    "gaussian_product",
    "gaussian_power",
    "kappa",
    "mahalanobis_sq",
    "mixture_power",
    "mixture_product",
    "moment_match",
    "prune_merge_mixture",
]

_LOG_2PI = math.log(2.0 * math.pi)


def _symmetrize(P: np.ndarray) -> np.ndarray:
    # Products and powers accumulate floating-point asymmetry; fold it back
    # before any Cholesky factorisation.
    return 0.5 * (P + P.T)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Gaussian:
    """Normal density with mean vector ``mean`` and covariance ``cov``.

    The covariance must be symmetric within a small relative tolerance and
    positive definite; both are checked on construction so downstream code
    can factorise without re-validating.
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self) -> None:
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if mean.ndim != 1:
            raise ValueError("mean must be a vector")
        d = mean.size
        if cov.shape != (d, d):
            raise ValueError(f"covariance shape {cov.shape} does not match dimension {d}")
        if not np.all(np.isfinite(mean)) or not np.all(np.isfinite(cov)):
            raise ValueError("non-finite values in Gaussian parameters")
        skew = np.max(np.abs(cov - cov.T)) if d else 0.0
        if skew > 1e-9 * max(1.0, float(np.max(np.abs(cov)))):
            raise ValueError("covariance is not symmetric")
        try:
            np.linalg.cholesky(_symmetrize(cov))
        except np.linalg.LinAlgError:
            raise ValueError("covariance is not positive definite") from None
        object.__setattr__(self, "mean", _readonly(mean))
        object.__setattr__(self, "cov", _readonly(_symmetrize(cov)))

    @classmethod
    def unchecked(cls, mean: np.ndarray, cov: np.ndarray) -> "Gaussian":
        """Construct without validation, for hot loops whose covariances are
        symmetric positive definite by construction (for instance a shared
        Joseph-form update covariance reused across many means)."""
        g = object.__new__(cls)
        mean = np.asarray(mean, dtype=float)
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(g, "mean", mean)
        object.__setattr__(g, "cov", cov)
        return g

    @property
    def dim(self) -> int:
        return self.mean.size

    def logpdf(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        L = np.linalg.cholesky(self.cov)
        y = np.linalg.solve(L, x - self.mean)
        logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
        return -0.5 * (float(y @ y) + logdet + self.dim * _LOG_2PI)

    def pdf(self, x: np.ndarray) -> float:
        return math.exp(self.logpdf(x))


@dataclass(frozen=True, eq=False)
class ScaledGaussian:
    """Non-negative scale factor paired with a Gaussian density."""

    scale: float
    gaussian: Gaussian

    def __post_init__(self) -> None:
        if not (self.scale >= 0.0 and math.isfinite(self.scale)):
            raise ValueError("scale must be finite and non-negative")


@dataclass(frozen=True, eq=False)
class GaussianMixture:
    """Weighted sum of Gaussians with strictly positive weights.

    Weights are not required to sum to one: the same type represents both
    unnormalised densities and Poisson intensity functions.  The mixture
    may be empty.
    """

    components: tuple[tuple[float, Gaussian], ...] = ()

    def __post_init__(self) -> None:
        comps = tuple((float(w), g) for w, g in self.components)
        dims = {g.dim for _, g in comps}
        if len(dims) > 1:
            raise ValueError("mixed component dimensions")
        for w, _ in comps:
            if not (w > 0.0 and math.isfinite(w)):
                raise ValueError("component weights must be positive and finite")
        object.__setattr__(self, "components", comps)

    def __len__(self) -> int:
        return len(self.components)

    @property
    def dim(self) -> int | None:
        return self.components[0][1].dim if self.components else None

    @property
    def total_weight(self) -> float:
        return float(sum(w for w, _ in self.components))

    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.components])

    def evaluate(self, x: np.ndarray) -> float:
        return float(sum(w * g.pdf(x) for w, g in self.components))

    def scaled(self, factor: float) -> "GaussianMixture":
        if factor == 0.0 or not self.components:
            return GaussianMixture()
        return GaussianMixture(tuple((w * factor, g) for w, g in self.components))

    def map_gaussians(self, fn) -> "GaussianMixture":
        return GaussianMixture(tuple((w, fn(g)) for w, g in self.components))


def gaussian_product(g1: Gaussian, g2: Gaussian) -> ScaledGaussian:
    """Pointwise product of two Gaussian densities.

    N(x; m1, P1) N(x; m2, P2) = a N(x; m, P) with a = N(m1; m2, P1 + P2),
    P = (P1^-1 + P2^-1)^-1 and m = P (P1^-1 m1 + P2^-1 m2).  The result is
    computed from the factored sum P1 + P2 so no explicit inverses are
    formed.
    """
    if g1.dim != g2.dim:
        raise ValueError("dimension mismatch in gaussian_product")
    psum = g1.cov + g2.cov
    L = np.linalg.cholesky(_symmetrize(psum))
    diff = g1.mean - g2.mean
    y = np.linalg.solve(L, diff)
    logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
    log_scale = -0.5 * (float(y @ y) + logdet + g1.dim * _LOG_2PI)
    # A = P2 (P1 + P2)^-1, so m = A m1 + (I - A) m2 and P = A P1.
    A = np.linalg.solve(psum, g2.cov).T
    mean = A @ g1.mean + (np.eye(g1.dim) - A) @ g2.mean
    cov = _symmetrize(A @ g1.cov)
    return ScaledGaussian(math.exp(log_scale), Gaussian(mean, cov))


def log_kappa(omega: float, cov: np.ndarray) -> float:
    """Logarithm of :func:`kappa`, safe for high dimensions or small omega."""
    if not (0.0 < omega <= 1.0):
        raise ValueError("omega must lie in (0, 1]")
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    try:
        L = np.linalg.cholesky(_symmetrize(cov))
    except np.linalg.LinAlgError:
        raise ValueError("covariance is not positive definite") from None
    d = cov.shape[0]
    logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
    return 0.5 * (1.0 - omega) * (d * _LOG_2PI + logdet) - 0.5 * d * math.log(omega)


def kappa(omega: float, cov: np.ndarray) -> float:
    """Normalising constant of an omega-power of a Gaussian.

    int N(x; m, P)^omega dx = |2 pi P / omega|^(1/2) / |2 pi P|^(omega/2),
    independent of the mean.  Equals 1 at omega = 1.
    """
    return math.exp(log_kappa(omega, cov))


def gaussian_power(g: Gaussian, omega: float) -> ScaledGaussian:
    """omega-power of a Gaussian: N^omega = kappa(omega, P) N(x; m, P/omega)."""
    if omega == 1.0:
        return ScaledGaussian(1.0, g)
    return ScaledGaussian(kappa(omega, g.cov), Gaussian(g.mean, g.cov / omega))


def mixture_power(gm: GaussianMixture, omega: float) -> GaussianMixture:
    """Componentwise omega-power of a mixture.

    (sum_j w_j N_j)^omega is approximated by sum_j w_j^omega kappa(omega, P_j)
    N(x; m_j, P_j / omega), which upper-bounds the true power pointwise for
    omega in (0, 1] and is exact for a single component or omega = 1.
    """
    if omega == 1.0:
        return gm
    if not (0.0 < omega < 1.0):
        raise ValueError("omega must lie in (0, 1]")
    out = []
    for w, g in gm.components:
        sg = gaussian_power(g, omega)
        out.append((w**omega * sg.scale, sg.gaussian))
    return GaussianMixture(tuple(out))


def _stack(gm: GaussianMixture) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    means = np.stack([g.mean for _, g in gm.components])
    covs = np.stack([g.cov for _, g in gm.components])
    return gm.weights(), means, covs


def mixture_product(gm1: GaussianMixture, gm2: GaussianMixture) -> GaussianMixture:
    """All pairwise products of two mixtures, weights folded into the scales.

    The result has len(gm1) * len(gm2) components (before any reduction), so
    callers normally follow up with :func:`prune_merge_mixture`.  Pairs are
    processed with stacked linear algebra; the output is an ordinary mixture.
    """
    if not gm1.components or not gm2.components:
        return GaussianMixture()
    if gm1.dim != gm2.dim:
        raise ValueError("dimension mismatch in mixture_product")
    w1, m1, p1 = _stack(gm1)
    w2, m2, p2 = _stack(gm2)
    n1, n2, d = len(w1), len(w2), m1.shape[1]
    psum = p1[:, None] + p2[None, :]
    L = np.linalg.cholesky(0.5 * (psum + np.swapaxes(psum, -1, -2)))
    diff = m1[:, None, :] - m2[None, :, :]
    y = np.linalg.solve(L, diff[..., None])[..., 0]
    logdet = 2.0 * np.sum(np.log(np.diagonal(L, axis1=-2, axis2=-1)), axis=-1)
    log_alpha = -0.5 * (np.sum(y * y, axis=-1) + logdet + d * _LOG_2PI)
    weights = w1[:, None] * w2[None, :] * np.exp(log_alpha)
    # A[i, j] = P2_j (P1_i + P2_j)^-1
    A = np.swapaxes(np.linalg.solve(psum, np.broadcast_to(p2[None, :], psum.shape)), -1, -2)
    means = (A @ m1[:, None, :, None])[..., 0] + ((np.eye(d) - A) @ m2[None, :, :, None])[..., 0]
    covs = A @ np.broadcast_to(p1[:, None], psum.shape)
    covs = 0.5 * (covs + np.swapaxes(covs, -1, -2))
    out = []
    for i in range(n1):
        for j in range(n2):
            w = float(weights[i, j])
            if w > 0.0:
                out.append((w, Gaussian(means[i, j], covs[i, j])))
    return GaussianMixture(tuple(out))


def mahalanobis_sq(g1: Gaussian, g2: Gaussian) -> float:
    """Squared Mahalanobis distance between means under the summed covariance:
    (m1 - m2)^T (P1 + P2)^-1 (m1 - m2)."""
    if g1.dim != g2.dim:
        raise ValueError("dimension mismatch in mahalanobis_sq")
    diff = g1.mean - g2.mean
    d = float(diff @ np.linalg.solve(_symmetrize(g1.cov + g2.cov), diff))
    return max(d, 0.0)


def moment_match(components: list[tuple[float, Gaussian]]) -> Gaussian:
    """Single Gaussian matching the mean and covariance of a weighted mixture.

    Weights may be unnormalised but must have a positive sum.
    """
    if not components:
        raise ValueError("cannot moment-match an empty mixture")
    w = np.array([c[0] for c in components], dtype=float)
    total = float(w.sum())
    if not (total > 0.0 and math.isfinite(total)):
        raise ValueError("moment_match requires a positive total weight")
    w = w / total
    means = np.stack([g.mean for _, g in components])
    mean = w @ means
    cov = np.zeros((means.shape[1], means.shape[1]))
    for wi, (_, g) in zip(w, components):
        diff = g.mean - mean
        cov += wi * (g.cov + np.outer(diff, diff))
    return Gaussian(mean, _symmetrize(cov))


def prune_merge_mixture(
    gm: GaussianMixture,
    prune_thresh: float,
    merge_thresh: float,
    max_components: int,
) -> GaussianMixture:
    """Reduce a mixture: prune, then merge, then cap the component count.

    Components with weight below ``prune_thresh`` are dropped first.  Then,
    repeatedly, the highest-weight remaining component absorbs (by moment
    matching) every component whose squared Mahalanobis distance from it,
    measured with the absorber's covariance, is at most ``merge_thresh``;
    passes repeat until no merge fires, so the operation is idempotent.
    Finally only the ``max_components`` heaviest components are kept.  Total
    weight is conserved by merging but not by pruning or capping.
    """
    if max_components < 1:
        raise ValueError("max_components must be at least 1")
    comps = [(w, g) for w, g in gm.components if w >= prune_thresh]
    merged = True
    while merged and len(comps) > 1:
        merged = False
        order = np.argsort(-np.array([w for w, _ in comps]), kind="stable")
        remaining = [comps[i] for i in order]
        out: list[tuple[float, Gaussian]] = []
        while remaining:
            w0, g0 = remaining.pop(0)
            if not remaining:
                out.append((w0, g0))
                break
            diffs = np.stack([g.mean - g0.mean for _, g in remaining])
            dist = np.einsum("ij,ij->i", diffs, np.linalg.solve(g0.cov, diffs.T).T)
            close = np.flatnonzero(dist <= merge_thresh)
            if close.size:
                merged = True
                cluster = [(w0, g0)] + [remaining[j] for j in close]
                weight = float(sum(w for w, _ in cluster))
                out.append((weight, moment_match(cluster)))
                remaining = [c for j, c in enumerate(remaining) if j not in set(close)]
            else:
                out.append((w0, g0))
        comps = out
    if len(comps) > max_components:
        order = np.argsort(-np.array([w for w, _ in comps]), kind="stable")
        comps = [comps[i] for i in order[:max_components]]
    return GaussianMixture(tuple(comps))
