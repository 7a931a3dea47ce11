"""Tests for the Gaussian mean-shift observation model.

The log-likelihood-ratio increment is theta*X - theta**2/2, so its density
under H0 is Gaussian with mean -theta**2/2 and variance theta**2, and the
H1 density is the exponentially tilted H0 density: K1(z) = exp(z) * K0(z).
"""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from cusumkit import Hypothesis, gaussian_shift, log_lr_cdf, log_lr_pdf, sample_log_lr

SQRT_2PI = math.sqrt(2.0 * math.pi)


def direct_gaussian_pdf(z, mean, sd):
    z = np.asarray(z, dtype=float)
    return np.exp(-0.5 * ((z - mean) / sd) ** 2) / (sd * SQRT_2PI)


class TestValidation:
    def test_zero_theta_rejected(self):
        """A zero shift makes the two hypotheses identical; reject it."""
        with pytest.raises(ValueError):
            gaussian_shift(0.0)

    @pytest.mark.parametrize("theta", [math.inf, -math.inf, math.nan])
    def test_non_finite_theta_rejected(self, theta):
        with pytest.raises(ValueError):
            gaussian_shift(theta)

    def test_negative_theta_allowed(self):
        model = gaussian_shift(-1.5)
        assert model.theta == -1.5


class TestPdf:
    def test_h0_peak_value(self):
        """At its mean -theta**2/2 the H0 density equals 1/(|theta| sqrt(2 pi))."""
        for theta in (0.5, 1.0, 2.0, -0.75):
            model = gaussian_shift(theta)
            mean = -0.5 * theta * theta
            expected = 1.0 / (abs(theta) * SQRT_2PI)
            np.testing.assert_allclose(
                log_lr_pdf(model, Hypothesis.H0, mean), expected, rtol=1e-14
            )

    def test_h1_equals_h0_at_zero(self):
        """exp(0) = 1, so the tilted density coincides with H0 at z = 0."""
        for theta in (0.25, 1.0, 2.0):
            model = gaussian_shift(theta)
            assert log_lr_pdf(model, Hypothesis.H1, 0.0) == log_lr_pdf(
                model, Hypothesis.H0, 0.0
            )

    @pytest.mark.parametrize("theta", [0.25, 0.5, 1.0, 2.0, -1.0])
    def test_h1_matches_direct_gaussian(self, theta):
        """The tilted H1 density equals the Gaussian with mean +theta**2/2."""
        model = gaussian_shift(theta)
        v = theta * theta
        sd = abs(theta)
        z = np.linspace(0.5 * v - 9.0 * sd, 0.5 * v + 9.0 * sd, 2001)
        expected = direct_gaussian_pdf(z, 0.5 * v, sd)
        got = log_lr_pdf(model, Hypothesis.H1, z)
        np.testing.assert_allclose(got, expected, atol=1e-12, rtol=0)

    def test_smoothed_tilt_identity(self):
        """exp(-y) K1(y-x) agrees with exp(-x) K0(y-x) to working precision.

        The products reach ~3.5e4 (exp(10) times an O(1) density value),
        where one float64 ulp is already 3.6e-12, so an absolute bound of
        1e-12 cannot hold there. The honest bounds: relative agreement at
        machine precision, with an additive floor of 1e-300 absorbing the
        subnormal range where float64 relative precision degrades, plus
        1e-12 absolute restricted to magnitudes <= 4096 where 1e-12 still
        exceeds one ulp.
        """
        rng = np.random.default_rng(42)
        x = rng.uniform(-10.0, 10.0, size=10_000)
        y = rng.uniform(-10.0, 10.0, size=10_000)
        thetas = rng.choice([0.25, 0.5, 1.0, 2.0], size=10_000)
        thetas *= rng.choice([-1.0, 1.0], size=10_000)
        lhs = np.empty_like(x)
        rhs = np.empty_like(x)
        for theta in np.unique(thetas):
            model = gaussian_shift(theta)
            mask = thetas == theta
            z = y[mask] - x[mask]
            lhs[mask] = np.exp(-y[mask]) * log_lr_pdf(model, Hypothesis.H1, z)
            rhs[mask] = np.exp(-x[mask]) * log_lr_pdf(model, Hypothesis.H0, z)
        diff = np.abs(lhs - rhs)
        scale = np.maximum(np.abs(lhs), np.abs(rhs))
        assert np.all(diff <= 4e-15 * scale + 1e-300)
        small = scale <= 4096.0
        assert np.max(diff[small], initial=0.0) <= 1e-12

    def test_underflow_clamps_to_zero(self):
        """Where K0 underflows, the tilted density is exactly zero, not inf*0."""
        model = gaussian_shift(0.25)
        for z in (-40.0, 40.0, 700.0):
            assert log_lr_pdf(model, Hypothesis.H0, z) == 0.0
            assert log_lr_pdf(model, Hypothesis.H1, z) == 0.0
        z = np.linspace(-800.0, 800.0, 4001)
        for hyp in Hypothesis:
            values = log_lr_pdf(model, hyp, z)
            assert np.all(np.isfinite(values))
            assert np.all(values >= 0.0)

    @pytest.mark.parametrize("theta", [0.25, 1.0, 2.0])
    def test_normalization(self, theta):
        """Both densities integrate to one over mean +- 13 standard deviations."""
        model = gaussian_shift(theta)
        v = theta * theta
        for hyp, mean in ((Hypothesis.H0, -0.5 * v), (Hypothesis.H1, 0.5 * v)):
            total, _ = quad(
                lambda t: log_lr_pdf(model, hyp, t),
                mean - 13.0 * abs(theta),
                mean + 13.0 * abs(theta),
                limit=200,
            )
            np.testing.assert_allclose(total, 1.0, atol=1e-8, rtol=0)


class TestCdf:
    def test_hand_values_at_zero(self):
        """F0(0) = Phi(theta/2) and F1(0) = Phi(-theta/2) for theta = 1."""
        model = gaussian_shift(1.0)
        np.testing.assert_allclose(
            log_lr_cdf(model, Hypothesis.H0, 0.0), 0.6914624612740131, rtol=1e-13
        )
        np.testing.assert_allclose(
            log_lr_cdf(model, Hypothesis.H1, 0.0), 0.3085375387259869, rtol=1e-13
        )

    @pytest.mark.parametrize("hyp", [Hypothesis.H0, Hypothesis.H1])
    def test_cdf_matches_integrated_pdf(self, hyp):
        model = gaussian_shift(0.7)
        lo = -0.5 * 0.49 - 13.0 * 0.7
        for z in (-1.5, -0.245, 0.0, 0.8, 2.0):
            integral, _ = quad(lambda t: log_lr_pdf(model, hyp, t), lo, z, limit=200)
            np.testing.assert_allclose(
                log_lr_cdf(model, hyp, z), integral, atol=1e-8, rtol=0
            )

    def test_monotone_and_bounded(self):
        model = gaussian_shift(1.3)
        z = np.linspace(-15.0, 15.0, 1501)
        for hyp in Hypothesis:
            values = log_lr_cdf(model, hyp, z)
            assert np.all(np.diff(values) >= 0.0)
            assert np.all((values >= 0.0) & (values <= 1.0))
            np.testing.assert_allclose(values[0], 0.0, atol=1e-8)
            np.testing.assert_allclose(values[-1], 1.0, atol=1e-8)


class TestSampler:
    def test_moments(self):
        """Sample mean is -+theta**2/2 and variance theta**2 under H0/H1."""
        theta = 1.0
        model = gaussian_shift(theta)
        rng = np.random.default_rng(42)
        n = 200_000
        for hyp, mean in ((Hypothesis.H0, -0.5), (Hypothesis.H1, 0.5)):
            draws = sample_log_lr(model, hyp, rng, size=n)
            assert draws.shape == (n,)
            np.testing.assert_allclose(draws.mean(), mean, atol=4.0 / math.sqrt(n))
            np.testing.assert_allclose(draws.var(), theta * theta, rtol=0.02)

    def test_empirical_cdf_agreement(self):
        model = gaussian_shift(0.5)
        rng = np.random.default_rng(42)
        draws = sample_log_lr(model, Hypothesis.H1, rng, size=100_000)
        for z in (-0.3, 0.125, 0.6):
            p = log_lr_cdf(model, Hypothesis.H1, z)
            se = math.sqrt(p * (1.0 - p) / draws.size)
            assert abs(np.mean(draws <= z) - p) <= 4.0 * se

    def test_determinism_and_scalar_mode(self):
        model = gaussian_shift(2.0)
        a = sample_log_lr(model, Hypothesis.H0, np.random.default_rng(7), size=64)
        b = sample_log_lr(model, Hypothesis.H0, np.random.default_rng(7), size=64)
        assert np.array_equal(a, b)
        single = sample_log_lr(model, Hypothesis.H1, np.random.default_rng(7))
        assert isinstance(single, float)
