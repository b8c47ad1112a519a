"""Random-variate and density primitives used by the Gibbs updates.

Everything that draws takes an explicit ``numpy.random.Generator``; nothing
here touches global random state.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy import special

_TAIL_THRESHOLD = 5.0
_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


def normal_cdf(x):
    """Standard normal CDF."""
    return special.ndtr(x)


def normal_logcdf(x):
    return special.log_ndtr(x)


def normal_pdf(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x - _LOG_SQRT_2PI)


def normal_logpdf(x, mean=0.0, var=1.0):
    x = np.asarray(x, dtype=float)
    return -0.5 * (x - mean) ** 2 / var - 0.5 * np.log(var) - _LOG_SQRT_2PI


class TruncSide(enum.Enum):
    """Which half-line a one-sided truncated normal lives on."""

    BelowZero = "below"  # N_-: support (-inf, 0]
    AboveZero = "above"  # N_+: support (0, inf)


def _std_normal_above(a, rng):
    """Draw Z ~ N(0, 1) conditioned on Z >= a, elementwise over array ``a``.

    Inverse-CDF for a <= 5; exponential rejection (Robert, 1995) beyond.
    """
    a = np.asarray(a, dtype=float)
    z = np.empty_like(a)
    bulk = a <= _TAIL_THRESHOLD
    if bulk.any():
        ab = a[bulk]
        # 1 - U lies in (0, 1] so ndtri never sees 0
        u = 1.0 - rng.random(ab.shape)
        z[bulk] = -special.ndtri(u * special.ndtr(-ab))
    tail = ~bulk
    if tail.any():
        at = a[tail]
        out = np.empty_like(at)
        pending = np.arange(at.size)
        lam = 0.5 * (at + np.sqrt(at * at + 4.0))
        while pending.size:
            ap, lp = at[pending], lam[pending]
            cand = ap + rng.exponential(1.0, pending.size) / lp
            accept = rng.random(pending.size) <= np.exp(-0.5 * (cand - lp) ** 2)
            out[pending[accept]] = cand[accept]
            pending = pending[~accept]
        z[tail] = out
    return z


def sample_trunc_normal(mu, sigma, side, rng, size=None):
    """Sample a normal with location ``mu`` and scale ``sigma`` truncated to one side of zero.

    ``mu`` and ``sigma`` broadcast; ``size`` may be given for scalar inputs.
    Returns a float for scalar inputs.
    """
    mu_arr = np.asarray(mu, dtype=float)
    sigma_arr = np.asarray(sigma, dtype=float)
    if not np.all(np.isfinite(mu_arr)):
        raise ValueError("truncated normal location must be finite")
    if np.any(sigma_arr <= 0):
        raise ValueError("truncated normal scale must be positive")
    shape = np.broadcast_shapes(mu_arr.shape, sigma_arr.shape)
    if size is not None:
        shape = np.broadcast_shapes(shape, (size,) if np.isscalar(size) else tuple(size))
    mu_b = np.broadcast_to(mu_arr, shape)
    sigma_b = np.broadcast_to(sigma_arr, shape)
    side = TruncSide(side)
    if side is TruncSide.AboveZero:
        z = _std_normal_above(-mu_b / sigma_b, rng)
        x = mu_b + sigma_b * z
        x = np.maximum(x, np.finfo(float).tiny)
    else:
        z = _std_normal_above(mu_b / sigma_b, rng)
        x = np.minimum(mu_b - sigma_b * z, 0.0)
    if x.ndim == 0:
        return float(x)
    return x


def trunc_normal_mean(mu, sigma, side):
    """Analytic mean of the one-sided truncated normal."""
    side = TruncSide(side)
    if side is TruncSide.AboveZero:
        a = -mu / sigma
        return mu + sigma * np.exp(normal_logpdf(a) - special.log_ndtr(-a))
    b = -mu / sigma
    return mu - sigma * np.exp(normal_logpdf(b) - special.log_ndtr(b))


def sample_inverse_gamma(shape, scale, rng, size=None):
    """Inverse-gamma with density proportional to x^(-shape-1) exp(-scale/x)."""
    if np.any(np.asarray(shape) <= 0) or np.any(np.asarray(scale) <= 0):
        raise ValueError("inverse-gamma shape and scale must be positive")
    return scale / rng.gamma(shape, 1.0, size=size)


def invgamma_from_moments(mean, sd):
    """Solve for (shape, scale) giving an inverse-gamma the requested mean and sd."""
    if mean <= 0 or sd <= 0:
        raise ValueError("mean and sd must be positive")
    shape = 2.0 + (mean / sd) ** 2
    scale = mean * (shape - 1.0)
    return shape, scale


@dataclass(frozen=True)
class NIGParams:
    """Normal-inverse-gamma: sigma2 ~ IG(gamma0, s0sq), mu | sigma2 ~ N(mu0, sigma2 / nu0)."""

    mu0: float
    nu0: float
    gamma0: float
    s0sq: float

    def __post_init__(self):
        if not (self.nu0 > 0 and self.gamma0 > 0 and self.s0sq > 0):
            raise ValueError(f"invalid NIG parameters {self}")


def nig_posterior(prior: NIGParams, obs) -> NIGParams:
    obs = np.asarray(obs, dtype=float).ravel()
    n = obs.size
    if n == 0:
        return prior
    ybar = obs.mean()
    ss = float(np.sum((obs - ybar) ** 2))
    return _nig_update(prior, n, ybar, ss)


def _nig_update(prior, n, ybar, ss):
    nu_n = prior.nu0 + n
    mu_n = (prior.nu0 * prior.mu0 + n * ybar) / nu_n
    gamma_n = prior.gamma0 + 0.5 * n
    s_n = prior.s0sq + 0.5 * ss + 0.5 * prior.nu0 * n * (ybar - prior.mu0) ** 2 / nu_n
    return NIGParams(float(mu_n), float(nu_n), float(gamma_n), float(s_n))


def sample_nig(params: NIGParams, rng, size=None):
    """Draw (mu, sigma2) pairs from a normal-inverse-gamma."""
    sigma2 = sample_inverse_gamma(params.gamma0, params.s0sq, rng, size=size)
    mu = params.mu0 + np.sqrt(sigma2 / params.nu0) * rng.standard_normal(size)
    return mu, sigma2
