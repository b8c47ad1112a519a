import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from inhmm.distributions import (
    NIGParams,
    TruncSide,
    invgamma_from_moments,
    nig_posterior,
    normal_cdf,
    normal_logcdf,
    sample_inverse_gamma,
    sample_nig,
    sample_trunc_normal,
    trunc_normal_mean,
)


def mp_cdf(x):
    with mpmath.workdps(40):
        return float(mpmath.ncdf(mpmath.mpf(x)))


class TestNormalCdf:
    def test_half_at_zero(self):
        assert normal_cdf(0.0) == 0.5

    def test_known_value(self):
        assert normal_cdf(2.0) == pytest.approx(0.9772498680518208, abs=1e-15)

    def test_reflection(self):
        assert normal_cdf(-2.0) == pytest.approx(1.0 - normal_cdf(2.0), abs=1e-12)

    def test_against_mpmath_on_grid(self):
        xs = np.linspace(-8, 8, 801)
        ref = np.array([mp_cdf(x) for x in xs])
        assert np.max(np.abs(normal_cdf(xs) - ref)) < 1e-12

    def test_logcdf_deep_tail(self):
        with mpmath.workdps(40):
            ref = float(mpmath.log(mpmath.ncdf(-30)))
        assert normal_logcdf(-30.0) == pytest.approx(ref, rel=1e-12)

    @given(st.floats(-8, 8))
    def test_monotone_and_bounded(self, x):
        assert 0 < normal_cdf(x) < 1
        assert normal_cdf(x + 1e-3) >= normal_cdf(x)


class TestTruncNormal:
    def test_half_normal_mean_above(self):
        rng = np.random.default_rng(1)
        draws = sample_trunc_normal(0.0, 1.0, TruncSide.AboveZero, rng, size=10**6)
        assert np.all(draws > 0)
        assert abs(draws.mean() - np.sqrt(2 / np.pi)) < 0.005

    def test_half_normal_mean_below(self):
        rng = np.random.default_rng(2)
        draws = sample_trunc_normal(0.0, 1.0, TruncSide.BelowZero, rng, size=10**6)
        assert np.all(draws <= 0)
        assert abs(draws.mean() + np.sqrt(2 / np.pi)) < 0.005

    def test_negligible_truncation(self):
        rng = np.random.default_rng(3)
        draws = sample_trunc_normal(10.0, 1.0, TruncSide.AboveZero, rng, size=10**5)
        assert np.all(draws > 0)
        assert abs(draws.mean() - 10.0) < 0.01

    @pytest.mark.parametrize("mu", [-8.0, -2.0, 0.0, 2.0, 8.0])
    @pytest.mark.parametrize("side", list(TruncSide))
    def test_mean_within_mcse(self, mu, side):
        rng = np.random.default_rng(10 + int(mu))
        draws = sample_trunc_normal(mu, 1.0, side, rng, size=200_000)
        se = draws.std(ddof=1) / np.sqrt(draws.size)
        assert abs(draws.mean() - trunc_normal_mean(mu, 1.0, side)) < 3 * se

    def test_deep_tail_distribution(self):
        # N+(-8, 1) is -8 + Z with Z ~ N(0, 1) restricted to [8, inf)
        rng = np.random.default_rng(4)
        draws = sample_trunc_normal(-8.0, 1.0, TruncSide.AboveZero, rng, size=50_000)
        ref = stats.truncnorm(8.0, np.inf)
        assert stats.kstest(draws + 8.0, ref.cdf).pvalue > 1e-3

    def test_mean_against_scipy_truncnorm(self):
        for mu in (-8.0, -2.0, 0.0, 2.0, 8.0):
            ref = stats.truncnorm(-mu, np.inf, loc=mu).mean()
            assert trunc_normal_mean(mu, 1.0, TruncSide.AboveZero) == pytest.approx(ref, rel=1e-9)
            ref = stats.truncnorm(-np.inf, -mu, loc=mu).mean()
            assert trunc_normal_mean(mu, 1.0, TruncSide.BelowZero) == pytest.approx(ref, rel=1e-9)

    def test_scalar_returns_float(self):
        out = sample_trunc_normal(1.0, 2.0, TruncSide.AboveZero, np.random.default_rng(0))
        assert isinstance(out, float) and out > 0

    def test_rejects_bad_arguments(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            sample_trunc_normal(np.nan, 1.0, TruncSide.AboveZero, rng)
        with pytest.raises(ValueError):
            sample_trunc_normal(0.0, 0.0, TruncSide.AboveZero, rng)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(-40, 40), st.floats(0.1, 10), st.sampled_from(list(TruncSide)))
    def test_support(self, mu, sigma, side):
        draws = sample_trunc_normal(mu, sigma, side, np.random.default_rng(0), size=64)
        if side is TruncSide.AboveZero:
            assert np.all(draws > 0)
        else:
            assert np.all(draws <= 0)


class TestInverseGamma:
    def test_mean(self):
        draws = sample_inverse_gamma(3.0, 2.0, np.random.default_rng(5), size=10**6)
        assert np.all(draws > 0)
        assert abs(draws.mean() - 1.0) < 0.01

    def test_reciprocal_gamma_identity(self):
        a = sample_inverse_gamma(3.0, 2.0, np.random.default_rng(6), size=20_000)
        b = 1.0 / np.random.default_rng(7).gamma(3.0, 1.0 / 2.0, size=20_000)
        assert stats.ks_2samp(a, b).pvalue > 0.01

    def test_moment_solution(self):
        shape, scale = invgamma_from_moments(0.2, 1.0)
        mean = scale / (shape - 1)
        sd = np.sqrt(scale**2 / ((shape - 1) ** 2 * (shape - 2)))
        assert mean == pytest.approx(0.2, rel=1e-12)
        assert sd == pytest.approx(1.0, rel=1e-12)
        assert shape == pytest.approx(2.04)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            sample_inverse_gamma(0.0, 1.0, np.random.default_rng(0))


def _nig_numeric_posterior_mean_mu(prior, obs):
    """E[mu | obs] by 2-D quadrature of the unnormalized NIG posterior."""

    def log_joint(mu, s2):
        lp = stats.invgamma.logpdf(s2, prior.gamma0, scale=prior.s0sq)
        lp += stats.norm.logpdf(mu, prior.mu0, np.sqrt(s2 / prior.nu0))
        lp += stats.norm.logpdf(obs, mu, np.sqrt(s2)).sum()
        return lp

    post = nig_posterior(prior, obs)
    c = log_joint(post.mu0, post.s0sq / (post.gamma0 + 1))
    f = lambda s2, mu: np.exp(log_joint(mu, s2) - c)  # noqa: E731
    g = lambda s2, mu: mu * f(s2, mu)  # noqa: E731
    lo, hi = post.mu0 - 6, post.mu0 + 6
    z, _ = integrate.dblquad(f, lo, hi, 1e-6, 20.0, epsabs=1e-12, epsrel=1e-10)
    m, _ = integrate.dblquad(g, lo, hi, 1e-6, 20.0, epsabs=1e-12, epsrel=1e-10)
    return m / z


class TestNIG:
    def test_empty_obs_returns_prior(self):
        prior = NIGParams(0.3, 0.5, 2.0, 1.0)
        assert nig_posterior(prior, []) == prior

    def test_symmetric_data(self):
        assert nig_posterior(NIGParams(0, 1, 2, 1), [0.0, 0.0]).mu0 == 0.0

    def test_single_obs_mean(self):
        y = 1.7
        post = nig_posterior(NIGParams(0.0, 0.1, 2.04, 0.208), [y])
        assert post.mu0 == pytest.approx(y / 1.1, abs=1e-14)

    def test_single_obs_against_quadrature(self):
        prior = NIGParams(0.0, 0.1, 3.0, 1.0)
        y = np.array([1.2])
        assert nig_posterior(prior, y).mu0 == pytest.approx(_nig_numeric_posterior_mean_mu(prior, y), abs=1e-6)

    def test_composable(self):
        rng = np.random.default_rng(8)
        prior = NIGParams(0.5, 0.3, 2.5, 0.7)
        a, b = rng.normal(size=7), rng.normal(size=5)
        seq = nig_posterior(nig_posterior(prior, a), b)
        joint = nig_posterior(prior, np.concatenate([a, b]))
        for f in ("mu0", "nu0", "gamma0", "s0sq"):
            assert getattr(seq, f) == pytest.approx(getattr(joint, f), abs=1e-12)

    @given(st.permutations(list(np.linspace(-2, 3, 6))))
    def test_exchangeable(self, obs):
        prior = NIGParams(0.0, 0.1, 2.04, 0.208)
        ref = nig_posterior(prior, np.linspace(-2, 3, 6))
        out = nig_posterior(prior, obs)
        assert out.mu0 == pytest.approx(ref.mu0, abs=1e-12)
        assert out.s0sq == pytest.approx(ref.s0sq, abs=1e-12)

    def test_sample_moments(self):
        params = NIGParams(1.0, 2.0, 4.0, 3.0)
        mu, s2 = sample_nig(params, np.random.default_rng(9), size=400_000)
        assert s2.mean() == pytest.approx(3.0 / 3.0, rel=0.01)
        assert mu.mean() == pytest.approx(1.0, abs=0.01)

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            NIGParams(0, 0, 1, 1)
