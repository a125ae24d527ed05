"""Gaussian primitive tests.

The heavy lifting is done by two kinds of oracle: numeric grid integration
(for scales and normalising constants) and pointwise identities (a product
or power of densities must match its closed form at arbitrary states).
Frozen constants below were derived from the grid oracles and are asserted
to full precision so regressions in the closed forms cannot hide inside a
loose tolerance.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import gaussian_support, integrate_1d, normal_pdf
from pmbfuse import (
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

# [oracle] 1-D grid integration of N(x;0,1)*N(x;2,1); equals N(0;2,2).
PRODUCT_N01_N21 = 0.1037768743551487
# [oracle] 2-D grid integration of N(x;0,I2)^0.5; equals 4*pi/sqrt(2*pi).
KAPPA_HALF_I2 = 5.013256549262001
# [oracle] 1-D grid integration of N(x;0,1)^0.5.
KAPPA_HALF_1D = 2.239030269840495
INV_4PI = 0.07957747154594767


def random_gaussian(rng, dim):
    mean = rng.uniform(-3.0, 3.0, size=dim)
    a = rng.uniform(-1.0, 1.0, size=(dim, dim))
    cov = a @ a.T + (0.3 + rng.uniform()) * np.eye(dim)
    return Gaussian(mean, cov)


def random_mixture(rng, dim, n):
    return GaussianMixture(
        tuple((float(rng.uniform(0.2, 2.0)), random_gaussian(rng, dim)) for _ in range(n))
    )


class TestGaussianType:
    def test_basic_fields(self):
        g = Gaussian([1.0, 2.0], np.eye(2))
        assert g.dim == 2
        assert not g.mean.flags.writeable
        assert not g.cov.flags.writeable

    def test_scalar_inputs_promoted(self):
        g = Gaussian(0.0, 4.0)
        assert g.dim == 1
        assert g.cov.shape == (1, 1)

    def test_rejects_asymmetric_covariance(self):
        with pytest.raises(ValueError, match="symmetric"):
            Gaussian([0.0, 0.0], [[1.0, 0.5], [0.2, 1.0]])

    def test_rejects_indefinite_covariance(self):
        with pytest.raises(ValueError, match="positive definite"):
            Gaussian([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]])

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ValueError):
            Gaussian([0.0, 0.0], np.eye(3))

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            Gaussian([np.nan], [[1.0]])
        with pytest.raises(ValueError):
            Gaussian([0.0], [[np.inf]])

    def test_logpdf_matches_scipy(self):
        rng = np.random.default_rng(3)
        for dim in (1, 2, 4):
            g = random_gaussian(rng, dim)
            for _ in range(5):
                x = rng.uniform(-4.0, 4.0, size=dim)
                assert g.pdf(x) == pytest.approx(normal_pdf(x, g.mean, g.cov), rel=1e-12)

    def test_scaled_gaussian_rejects_negative_scale(self):
        g = Gaussian([0.0], [[1.0]])
        with pytest.raises(ValueError):
            ScaledGaussian(-0.1, g)
        with pytest.raises(ValueError):
            ScaledGaussian(math.nan, g)


class TestMixtureType:
    def test_empty_mixture(self):
        gm = GaussianMixture()
        assert len(gm) == 0
        assert gm.dim is None
        assert gm.total_weight == 0.0

    def test_rejects_nonpositive_weights(self):
        g = Gaussian([0.0], [[1.0]])
        with pytest.raises(ValueError):
            GaussianMixture(((0.0, g),))
        with pytest.raises(ValueError):
            GaussianMixture(((-1.0, g),))

    def test_rejects_mixed_dimensions(self):
        with pytest.raises(ValueError):
            GaussianMixture(((1.0, Gaussian([0.0], [[1.0]])), (1.0, Gaussian([0.0, 0.0], np.eye(2)))))

    def test_evaluate_and_scaled(self):
        gm = GaussianMixture(((2.0, Gaussian([0.0], [[1.0]])),))
        x = np.array([0.5])
        assert gm.evaluate(x) == pytest.approx(2.0 * normal_pdf(x, [0.0], [[1.0]]), rel=1e-12)
        assert gm.scaled(0.5).total_weight == pytest.approx(1.0)
        assert len(gm.scaled(0.0)) == 0


class TestGaussianProduct:
    def test_frozen_1d_scale(self):
        sg = gaussian_product(Gaussian([0.0], [[1.0]]), Gaussian([2.0], [[1.0]]))
        assert sg.scale == pytest.approx(PRODUCT_N01_N21, rel=1e-12)
        assert sg.gaussian.mean[0] == pytest.approx(1.0, abs=1e-12)
        assert sg.gaussian.cov[0, 0] == pytest.approx(0.5, rel=1e-12)

    def test_equal_mean_2d(self):
        m = np.array([3.0, -1.0])
        sg = gaussian_product(Gaussian(m, np.eye(2)), Gaussian(m, np.eye(2)))
        assert sg.scale == pytest.approx(INV_4PI, rel=1e-12)
        np.testing.assert_allclose(sg.gaussian.mean, m, atol=1e-12)
        np.testing.assert_allclose(sg.gaussian.cov, 0.5 * np.eye(2), atol=1e-12)

    def test_pointwise_identity(self):
        rng = np.random.default_rng(11)
        for dim in (1, 2, 3):
            g1, g2 = random_gaussian(rng, dim), random_gaussian(rng, dim)
            sg = gaussian_product(g1, g2)
            for _ in range(10):
                x = rng.uniform(-4.0, 4.0, size=dim)
                assert g1.pdf(x) * g2.pdf(x) == pytest.approx(
                    sg.scale * sg.gaussian.pdf(x), rel=1e-10
                )

    def test_matches_information_form(self):
        # Independent formula: P = (P1^-1 + P2^-1)^-1, m = P(P1^-1 m1 + P2^-1 m2).
        rng = np.random.default_rng(12)
        g1, g2 = random_gaussian(rng, 3), random_gaussian(rng, 3)
        sg = gaussian_product(g1, g2)
        i1, i2 = np.linalg.inv(g1.cov), np.linalg.inv(g2.cov)
        cov = np.linalg.inv(i1 + i2)
        mean = cov @ (i1 @ g1.mean + i2 @ g2.mean)
        np.testing.assert_allclose(sg.gaussian.cov, cov, rtol=1e-10)
        np.testing.assert_allclose(sg.gaussian.mean, mean, rtol=1e-10)

    def test_scale_matches_grid_integration(self):
        rng = np.random.default_rng(13)
        for _ in range(10):
            g1, g2 = random_gaussian(rng, 1), random_gaussian(rng, 1)
            lo, hi = gaussian_support([g1.mean, g2.mean], [g1.cov, g2.cov])
            want = integrate_1d(
                lambda xs: normal_pdf(xs, g1.mean, g1.cov) * normal_pdf(xs, g2.mean, g2.cov),
                lo,
                hi,
            )
            assert gaussian_product(g1, g2).scale == pytest.approx(want, rel=1e-8)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            gaussian_product(Gaussian([0.0], [[1.0]]), Gaussian([0.0, 0.0], np.eye(2)))


class TestKappaAndPowers:
    def test_kappa_at_one(self):
        rng = np.random.default_rng(5)
        for dim in (1, 2, 3):
            assert kappa(1.0, random_gaussian(rng, dim).cov) == pytest.approx(1.0, rel=1e-12)

    def test_kappa_frozen(self):
        assert kappa(0.5, np.eye(2)) == pytest.approx(KAPPA_HALF_I2, rel=1e-12)
        assert kappa(0.5, np.array([[1.0]])) == pytest.approx(KAPPA_HALF_1D, rel=1e-12)

    def test_kappa_matches_grid_integration(self):
        rng = np.random.default_rng(6)
        for _ in range(8):
            var = float(rng.uniform(0.3, 4.0))
            omega = float(rng.uniform(0.2, 0.95))
            # N^omega decays like a Gaussian with variance var/omega, so the
            # integration window must widen as omega shrinks.
            half_width = 12.0 * math.sqrt(var / omega)
            want = integrate_1d(
                lambda xs: normal_pdf(xs, [0.0], [[var]]) ** omega,
                -half_width,
                half_width,
            )
            assert kappa(omega, [[var]]) == pytest.approx(want, rel=1e-8)

    def test_kappa_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            kappa(0.0, np.eye(2))
        with pytest.raises(ValueError):
            kappa(1.5, np.eye(2))
        with pytest.raises(ValueError):
            kappa(0.5, np.array([[-1.0]]))

    def test_kappa_pair_is_finite_positive(self):
        # kappa(w,P)*kappa(1-w, P*w/(1-w)) must not silently under/overflow.
        for omega in (0.1, 0.3, 0.5, 0.9, 0.99):
            P = np.diag([0.5, 2.0, 7.0])
            value = kappa(omega, P) * kappa(1.0 - omega, P * omega / (1.0 - omega))
            assert math.isfinite(value) and value > 0.0

    def test_gaussian_power_pointwise(self):
        rng = np.random.default_rng(7)
        for dim in (1, 2):
            g = random_gaussian(rng, dim)
            for omega in (0.3, 0.7):
                sg = gaussian_power(g, omega)
                np.testing.assert_allclose(sg.gaussian.cov, g.cov / omega, rtol=1e-12)
                for _ in range(10):
                    x = rng.uniform(-4.0, 4.0, size=dim)
                    assert g.pdf(x) ** omega == pytest.approx(
                        sg.scale * sg.gaussian.pdf(x), rel=1e-10
                    )

    def test_gaussian_power_identity_at_one(self):
        g = Gaussian([1.0], [[2.0]])
        sg = gaussian_power(g, 1.0)
        assert sg.scale == 1.0
        assert sg.gaussian is g


class TestMixturePower:
    def test_identity_at_one(self):
        rng = np.random.default_rng(8)
        gm = random_mixture(rng, 2, 3)
        assert mixture_power(gm, 1.0) is gm

    def test_componentwise_parameters(self):
        gm = GaussianMixture(((2.0, Gaussian([0.0, 0.0], np.eye(2))),))
        out = mixture_power(gm, 0.5)
        assert len(out) == 1
        w, g = out.components[0]
        assert w == pytest.approx(2.0**0.5 * KAPPA_HALF_I2, rel=1e-12)
        np.testing.assert_allclose(g.cov, 2.0 * np.eye(2), rtol=1e-12)

    def test_upper_bounds_exact_power(self):
        # (sum w_j N_j)^w <= sum (w_j N_j)^w pointwise for w in (0,1).
        rng = np.random.default_rng(9)
        for _ in range(5):
            gm = random_mixture(rng, 1, 3)
            for omega in (0.3, 0.5, 0.8):
                powered = mixture_power(gm, omega)
                for _ in range(20):
                    x = rng.uniform(-6.0, 6.0, size=1)
                    assert powered.evaluate(x) >= gm.evaluate(x) ** omega - 1e-12

    def test_rejects_bad_omega(self):
        gm = GaussianMixture(((1.0, Gaussian([0.0], [[1.0]])),))
        with pytest.raises(ValueError):
            mixture_power(gm, 0.0)
        with pytest.raises(ValueError):
            mixture_power(gm, 1.2)


class TestMixtureProduct:
    def test_pointwise_identity(self):
        rng = np.random.default_rng(10)
        gm1, gm2 = random_mixture(rng, 2, 3), random_mixture(rng, 2, 2)
        out = mixture_product(gm1, gm2)
        assert len(out) == 6
        for _ in range(20):
            x = rng.uniform(-4.0, 4.0, size=2)
            assert out.evaluate(x) == pytest.approx(gm1.evaluate(x) * gm2.evaluate(x), rel=1e-10)

    def test_single_pair_frozen(self):
        gm1 = GaussianMixture(((1.0, Gaussian([0.0], [[1.0]])),))
        gm2 = GaussianMixture(((1.0, Gaussian([2.0], [[1.0]])),))
        out = mixture_product(gm1, gm2)
        w, g = out.components[0]
        assert w == pytest.approx(PRODUCT_N01_N21, rel=1e-12)
        assert g.mean[0] == pytest.approx(1.0, abs=1e-12)
        assert g.cov[0, 0] == pytest.approx(0.5, rel=1e-12)

    def test_empty_operand(self):
        gm = GaussianMixture(((1.0, Gaussian([0.0], [[1.0]])),))
        assert len(mixture_product(gm, GaussianMixture())) == 0
        assert len(mixture_product(GaussianMixture(), gm)) == 0


class TestMahalanobis:
    def test_hand_value(self):
        g1, g2 = Gaussian([0.0], [[1.0]]), Gaussian([2.0], [[1.0]])
        assert mahalanobis_sq(g1, g2) == pytest.approx(2.0, rel=1e-12)

    def test_symmetric_and_zero_at_equal_means(self):
        rng = np.random.default_rng(14)
        g1, g2 = random_gaussian(rng, 3), random_gaussian(rng, 3)
        assert mahalanobis_sq(g1, g2) == pytest.approx(mahalanobis_sq(g2, g1), rel=1e-12)
        g3 = Gaussian(g1.mean, g2.cov)
        assert mahalanobis_sq(g1, g3) == 0.0

    def test_matches_inverse_formula(self):
        rng = np.random.default_rng(15)
        g1, g2 = random_gaussian(rng, 2), random_gaussian(rng, 2)
        diff = g1.mean - g2.mean
        want = float(diff @ np.linalg.inv(g1.cov + g2.cov) @ diff)
        assert mahalanobis_sq(g1, g2) == pytest.approx(want, rel=1e-10)


class TestMomentMatch:
    def test_single_component_identity(self):
        g = Gaussian([1.0, 2.0], np.eye(2))
        out = moment_match([(0.7, g)])
        np.testing.assert_allclose(out.mean, g.mean, atol=1e-15)
        np.testing.assert_allclose(out.cov, g.cov, atol=1e-15)

    def test_symmetric_pair(self):
        out = moment_match([(1.0, Gaussian([-1.0], [[1.0]])), (1.0, Gaussian([1.0], [[1.0]]))])
        assert out.mean[0] == pytest.approx(0.0, abs=1e-12)
        assert out.cov[0, 0] == pytest.approx(2.0, rel=1e-12)

    def test_matches_weighted_formula(self):
        rng = np.random.default_rng(16)
        comps = [(float(rng.uniform(0.2, 2.0)), random_gaussian(rng, 2)) for _ in range(4)]
        out = moment_match(comps)
        w = np.array([c[0] for c in comps])
        w = w / w.sum()
        mean = sum(wi * g.mean for wi, (_, g) in zip(w, comps))
        cov = sum(
            wi * (g.cov + np.outer(g.mean - mean, g.mean - mean))
            for wi, (_, g) in zip(w, comps)
        )
        np.testing.assert_allclose(out.mean, mean, rtol=1e-12)
        np.testing.assert_allclose(out.cov, cov, rtol=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            moment_match([])


class TestPruneMerge:
    def test_prune_drops_light_components(self):
        gm = GaussianMixture(
            ((1e-6, Gaussian([0.0], [[1.0]])), (0.9, Gaussian([50.0], [[1.0]])))
        )
        out = prune_merge_mixture(gm, 1e-5, 0.1, 30)
        assert len(out) == 1
        assert out.components[0][0] == pytest.approx(0.9)

    def test_identical_pair_merges(self):
        g = Gaussian([1.0, -1.0], np.eye(2))
        gm = GaussianMixture(((0.5, g), (0.5, g)))
        out = prune_merge_mixture(gm, 0.0, 0.1, 30)
        assert len(out) == 1
        w, merged = out.components[0]
        assert w == pytest.approx(1.0, rel=1e-12)
        np.testing.assert_allclose(merged.mean, g.mean, atol=1e-12)
        np.testing.assert_allclose(merged.cov, g.cov, atol=1e-12)

    def test_separated_components_unchanged(self):
        gm = GaussianMixture(
            ((0.4, Gaussian([0.0], [[1.0]])), (0.6, Gaussian([100.0], [[1.0]])))
        )
        out = prune_merge_mixture(gm, 1e-5, 0.1, 30)
        got = sorted((w, g.mean[0]) for w, g in out.components)
        assert got == [(0.4, 0.0), (0.6, 100.0)]

    def test_cap_keeps_heaviest(self):
        gm = GaussianMixture(
            tuple((0.1 * (i + 1), Gaussian([10.0 * i], [[1.0]])) for i in range(5))
        )
        out = prune_merge_mixture(gm, 0.0, 0.1, 2)
        assert sorted(w for w, _ in out.components) == pytest.approx([0.4, 0.5])

    def test_merge_conserves_total_weight(self):
        rng = np.random.default_rng(17)
        gm = random_mixture(rng, 2, 6)
        out = prune_merge_mixture(gm, 0.0, 4.0, 100)
        assert out.total_weight == pytest.approx(gm.total_weight, rel=1e-12)

    def test_rejects_zero_cap(self):
        with pytest.raises(ValueError):
            prune_merge_mixture(GaussianMixture(), 0.0, 0.1, 0)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(min_value=1, max_value=6), st.integers(min_value=0, max_value=2**31 - 1))
    def test_idempotent(self, n, seed):
        rng = np.random.default_rng(seed)
        gm = random_mixture(rng, 1, n)
        once = prune_merge_mixture(gm, 1e-3, 2.0, 4)
        twice = prune_merge_mixture(once, 1e-3, 2.0, 4)
        assert len(once) == len(twice)
        for (w1, g1), (w2, g2) in zip(once.components, twice.components):
            assert w1 == pytest.approx(w2, rel=1e-12)
            np.testing.assert_allclose(g1.mean, g2.mean, atol=1e-12)
            np.testing.assert_allclose(g1.cov, g2.cov, atol=1e-12)
