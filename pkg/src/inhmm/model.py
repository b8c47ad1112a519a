"""Model types and the deterministic transition law.

States are numbered from 1 as in the model description; array column ``k - 1``
holds state ``k``. Row ``j`` of ``alpha`` is the row used when the previous
state is ``j``, with row 0 reserved for the initial law of ``z_1``.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import special

from .distributions import NIGParams, invgamma_from_moments, sample_inverse_gamma, sample_nig, sample_trunc_normal, TruncSide

VARIANTS = ("inhmm1", "inhmm2", "ihmmp1", "ihmmp2")
DEFAULT_GRID_PERCENTILES = (1, 5, 10, 20, 30, 40, 50, 60, 70, 80, 90, 95, 99)

# Incremented whenever stick_weights_truncated falls back to the uniform vector.
underflow_count = 0


class RepresentationError(IndexError):
    """A state index beyond the instantiated representation was requested."""


def _as_2d(x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ValueError("covariates must be a vector or a (T, p) matrix")
    return x


def _standardize(values):
    mean = values.mean(axis=0)
    sd = values.std(axis=0, ddof=1)
    sd = np.where(sd > 0, sd, 1.0)
    return (values - mean) / sd, mean, sd


@dataclass
class Dataset:
    """Aligned covariate/response series in standardized units.

    ``x`` has shape (T, p); ``future_x`` (if any) has shape (n, p) and is
    already transformed with the fit-data standardization.
    """

    x: np.ndarray
    y: np.ndarray
    x_raw_mean: np.ndarray
    x_raw_sd: np.ndarray
    y_raw_mean: float = 0.0
    y_raw_sd: float = 1.0
    future_x: np.ndarray | None = None

    def __post_init__(self):
        self.x = _as_2d(self.x)
        self.y = np.asarray(self.y, dtype=float).ravel()
        self.x_raw_mean = np.atleast_1d(np.asarray(self.x_raw_mean, dtype=float))
        self.x_raw_sd = np.atleast_1d(np.asarray(self.x_raw_sd, dtype=float))
        if self.x.shape[0] != self.y.size:
            raise ValueError("x and y must have equal length")
        if self.y.size < 2:
            raise ValueError("need at least two time points")
        if self.future_x is not None:
            self.future_x = _as_2d(self.future_x)
            if self.future_x.shape[1] != self.p:
                raise ValueError("future_x dimension does not match x")

    @property
    def T(self) -> int:
        return self.y.size

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @classmethod
    def from_raw(cls, x, y, future_x=None, standardize_y=True):
        """Standardize raw series using fit-data moments only."""
        x = _as_2d(x)
        y = np.asarray(y, dtype=float).ravel()
        xs, xm, xsd = _standardize(x)
        if standardize_y:
            ys, ym, ysd = _standardize(y[:, None])
            ys, ym, ysd = ys.ravel(), float(ym[0]), float(ysd[0])
        else:
            ys, ym, ysd = y.copy(), 0.0, 1.0
        fx = None
        if future_x is not None:
            fx = (_as_2d(future_x) - xm) / xsd
        return cls(xs, ys, xm, xsd, ym, ysd, fx)

    def standardize_x(self, x_raw):
        return (_as_2d(x_raw) - self.x_raw_mean) / self.x_raw_sd

    def destandardize_y(self, y):
        return np.asarray(y) * self.y_raw_sd + self.y_raw_mean


@dataclass(frozen=True)
class SliceSequence:
    """Deterministic slice thresholds xi_k = kappa ** k."""

    kappa: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.kappa < 1.0:
            raise ValueError("kappa must lie in (0, 1)")

    def xi(self, k):
        return self.kappa ** np.asarray(k, dtype=float)

    def log_xi(self, k):
        return np.asarray(k, dtype=float) * np.log(self.kappa)

    def n_active(self, u):
        """Number of states k with xi_k > u (the active set is {1..n})."""
        u = np.asarray(u, dtype=float)
        guess = np.ceil(np.log(u) / np.log(self.kappa)).astype(np.int64) - 1
        guess = np.maximum(guess, 0)
        # repair floating-point edge cases against the exact definition
        guess = np.where(self.xi(guess + 1) > u, guess + 1, guess)
        guess = np.where((guess > 0) & (self.xi(np.maximum(guess, 1)) <= u), guess - 1, guess)
        return guess


@dataclass
class TransitionParams:
    """Probit stick-breaking parameters for states 1..K.

    ``alpha`` is (K + 1, K): rows 0..K, columns states 1..K.
    """

    alpha: np.ndarray
    beta: np.ndarray
    x_star: np.ndarray

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float)
        self.beta = np.asarray(self.beta, dtype=float).ravel()
        self.x_star = _as_2d(self.x_star)
        K = self.beta.size
        if self.alpha.ndim != 2 or self.alpha.shape[0] < K + 1 or self.alpha.shape[1] != K:
            raise ValueError(f"alpha must have at least {K + 1} rows and {K} columns, got {self.alpha.shape}")
        if self.x_star.shape[0] != K:
            raise ValueError("x_star length must match beta")

    @property
    def K(self) -> int:
        return self.beta.size

    @property
    def K_rep(self) -> int:
        return self.beta.size

    def copy(self):
        return TransitionParams(self.alpha.copy(), self.beta.copy(), self.x_star.copy())

    def truncate(self, K):
        return TransitionParams(self.alpha[: K + 1, :K].copy(), self.beta[:K].copy(), self.x_star[:K].copy())


@dataclass
class NormalEmission:
    """Per-state normal emissions N(mu_k, sigma2_k), covariate-free."""

    mu: np.ndarray
    sigma2: np.ndarray

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float).ravel()
        self.sigma2 = np.asarray(self.sigma2, dtype=float).ravel()
        if self.mu.size != self.sigma2.size:
            raise ValueError("mu and sigma2 lengths differ")
        if np.any(self.sigma2 <= 0):
            raise ValueError("emission variances must be positive")

    @property
    def K(self) -> int:
        return self.mu.size

    def state_means(self, x):
        x = _as_2d(x)
        return np.broadcast_to(self.mu, (x.shape[0], self.K))

    def state_vars(self, n):
        return np.broadcast_to(self.sigma2, (n, self.K))

    def logpdf(self, y, x):
        """(T, K) matrix of log f(y_t | k, x_t)."""
        y = np.asarray(y, dtype=float).reshape(-1, 1)
        return -0.5 * ((y - self.mu) ** 2 / self.sigma2 + np.log(2.0 * np.pi * self.sigma2))

    def truncate(self, K):
        return NormalEmission(self.mu[:K].copy(), self.sigma2[:K].copy())

    def copy(self):
        return self.truncate(self.K)

    def to_dict(self):
        return {"variant": "normal", "mu": self.mu.tolist(), "sigma2": self.sigma2.tolist()}


@dataclass
class RegressionEmission:
    """Per-state normal regressions N(eta_k0 + eta_k1' x, sigma2).

    ``sigma2`` has one entry per state when ``per_state`` is set, otherwise a
    single shared variance stored as a length-1 array.
    """

    eta: np.ndarray
    sigma2: np.ndarray
    per_state: bool = False

    def __post_init__(self):
        self.eta = np.asarray(self.eta, dtype=float)
        if self.eta.ndim != 2:
            raise ValueError("eta must be (K, p + 1)")
        self.sigma2 = np.atleast_1d(np.asarray(self.sigma2, dtype=float))
        expected = self.eta.shape[0] if self.per_state else 1
        if self.sigma2.size != expected:
            raise ValueError(f"sigma2 must have {expected} entries")
        if np.any(self.sigma2 <= 0):
            raise ValueError("emission variances must be positive")

    @property
    def K(self) -> int:
        return self.eta.shape[0]

    def state_means(self, x):
        x = _as_2d(x)
        return self.eta[:, 0] + x @ self.eta[:, 1:].T

    def state_vars(self, n):
        return np.broadcast_to(self.sigma2, (n, self.K))

    def logpdf(self, y, x):
        y = np.asarray(y, dtype=float).reshape(-1, 1)
        mean = self.state_means(x)
        return -0.5 * ((y - mean) ** 2 / self.sigma2 + np.log(2.0 * np.pi * self.sigma2))

    def truncate(self, K):
        s2 = self.sigma2[:K] if self.per_state else self.sigma2
        return RegressionEmission(self.eta[:K].copy(), s2.copy(), self.per_state)

    def copy(self):
        return self.truncate(self.K)

    def to_dict(self):
        return {
            "variant": "regression",
            "eta": self.eta.tolist(),
            "sigma2": self.sigma2.tolist(),
            "per_state": self.per_state,
        }


def emission_from_dict(d):
    if d["variant"] == "normal":
        return NormalEmission(d["mu"], d["sigma2"])
    if d["variant"] == "regression":
        return RegressionEmission(np.asarray(d["eta"], dtype=float), d["sigma2"], bool(d["per_state"]))
    raise ValueError(f"unknown emission variant {d['variant']!r}")


@dataclass(frozen=True)
class RegressionPrior:
    """eta_k ~ N(eta0, eta_scale * I); sigma2 ~ IG(gamma0, s0sq)."""

    eta0: tuple
    eta_scale: float
    gamma0: float
    s0sq: float

    def __post_init__(self):
        if not (self.eta_scale > 0 and self.gamma0 > 0 and self.s0sq > 0):
            raise ValueError(f"invalid regression prior {self}")


@dataclass
class Hyperpriors:
    mu_alpha: float = 2.0
    sigma_alpha: float = 1.0
    mu_beta: float = 2.0
    sigma_beta: float = 2.0 / 3.0
    emission: NIGParams | RegressionPrior = field(default_factory=lambda: NIGParams(0.0, 0.1, *invgamma_from_moments(0.2, 1.0)))
    x_star_grid: np.ndarray = field(default_factory=lambda: np.zeros((1, 1)))

    def __post_init__(self):
        self.x_star_grid = _as_2d(self.x_star_grid)
        if self.sigma_alpha <= 0 or self.sigma_beta <= 0:
            raise ValueError("prior scales must be positive")
        if self.x_star_grid.shape[0] == 0:
            raise ValueError("x_star grid must be nonempty")


@dataclass(frozen=True)
class ModelSpec:
    variant: str = "inhmm1"
    hyper: Hyperpriors = field(default_factory=Hyperpriors)
    slices: SliceSequence = field(default_factory=SliceSequence)
    per_state_var: bool = False  # regression variants only

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown model variant {self.variant!r}")
        want = RegressionPrior if self.regression else NIGParams
        if not isinstance(self.hyper.emission, want):
            raise ValueError(f"{self.variant} needs a {want.__name__} emission prior")

    @property
    def regression(self) -> bool:
        return self.variant in ("inhmm2", "ihmmp2")

    @property
    def homogeneous(self) -> bool:
        return self.variant in ("ihmmp1", "ihmmp2")


def percentile_grid(x, percentiles=DEFAULT_GRID_PERCENTILES):
    """Candidate x_star locations: product of per-component empirical percentiles."""
    x = _as_2d(x)
    axes = [np.unique(np.percentile(x[:, c], percentiles)) for c in range(x.shape[1])]
    return np.array(list(itertools.product(*axes)), dtype=float)


def default_hyperpriors(data: Dataset, variant="inhmm1", *, sigma2_mean=0.2, sigma2_sd=1.0,
                        mu0=0.0, nu0=0.1, grid_percentiles=DEFAULT_GRID_PERCENTILES, **overrides):
    """Hyperpriors as recommended for the simulation designs.

    For the regression variants eta0 is the least-squares fit of y on [1, x].
    """
    gamma0, s0sq = invgamma_from_moments(sigma2_mean, sigma2_sd)
    if variant in ("inhmm2", "ihmmp2"):
        design = np.column_stack([np.ones(data.T), data.x])
        eta0, *_ = np.linalg.lstsq(design, data.y, rcond=None)
        emission = RegressionPrior(tuple(float(v) for v in eta0), 1.0, gamma0, s0sq)
    else:
        emission = NIGParams(mu0, nu0, gamma0, s0sq)
    hyper = Hyperpriors(emission=emission, x_star_grid=percentile_grid(data.x, grid_percentiles))
    return replace(hyper, **overrides) if overrides else hyper


def kernel_h(x, x_star):
    """Negated squared Euclidean distance between covariate vectors."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x_star = np.atleast_1d(np.asarray(x_star, dtype=float))
    if x.shape != x_star.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {x_star.shape}")
    d = x - x_star
    return -float(d @ d)


def kernel_matrix(x, x_star):
    """(T, K) matrix of h(x_t; x_star_k)."""
    x = _as_2d(x)
    x_star = _as_2d(x_star)
    if x.shape[1] != x_star.shape[1]:
        raise ValueError("dimension mismatch between covariates and locations")
    d = x[:, None, :] - x_star[None, :, :]
    return -np.einsum("tkp,tkp->tk", d, d)


def log_stick_weights(alpha_rows, beta, H):
    """Log probit stick-breaking weights.

    alpha_rows : (R, K) rows of alpha; beta : (K,); H : (T, K) kernel values.
    Returns (T, R, K) array of log pi_k(j, x_t).
    """
    a = alpha_rows[None, :, :] + (beta * H)[:, None, :]
    log_v = special.log_ndtr(a)
    log_1mv = special.log_ndtr(-a)
    before = np.cumsum(log_1mv, axis=-1) - log_1mv
    return log_v + before


def stick_weight(j, k, x, trans: TransitionParams):
    """pi_k(j, x) for a single row j and state k (1-based)."""
    if k < 1 or k > trans.K:
        raise RepresentationError(f"state {k} outside representation 1..{trans.K}")
    if j < 0 or j >= trans.alpha.shape[0]:
        raise RepresentationError(f"row {j} not populated")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    H = kernel_matrix(x[None, :], trans.x_star[:k])
    lw = log_stick_weights(trans.alpha[j : j + 1, :k], trans.beta[:k], H)
    return float(np.exp(lw[0, 0, k - 1]))


def _normalize_log_rows(lw):
    """Normalize log weights along the last axis; all -inf rows become uniform."""
    global underflow_count
    m = np.max(lw, axis=-1, keepdims=True)
    bad = ~np.isfinite(m)
    if np.any(bad):
        underflow_count += int(np.sum(bad))
        warnings.warn("stick weights underflowed; using the uniform vector", RuntimeWarning, stacklevel=3)
        lw = np.where(bad, 0.0, lw)
        m = np.where(bad, 0.0, m)
    p = np.exp(lw - m)
    return p / p.sum(axis=-1, keepdims=True)


def stick_weights_truncated(j, x, trans: TransitionParams, K):
    """Stick weights over states 1..K renormalized to sum to one."""
    if K < 1:
        raise ValueError("truncation K must be positive")
    if K > trans.K:
        raise RepresentationError(f"truncation {K} exceeds representation {trans.K}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    H = kernel_matrix(x[None, :], trans.x_star[:K])
    lw = log_stick_weights(trans.alpha[j : j + 1, :K], trans.beta[:K], H)[0, 0]
    return _normalize_log_rows(lw)


def transition_matrices(trans: TransitionParams, x, K=None):
    """Renormalized K-state transition matrices at each covariate row.

    Returns (T, K + 1, K): entry [t, j, k-1] is P(z = k | previous j, x_t).
    """
    K = trans.K if K is None else K
    H = kernel_matrix(x, trans.x_star[:K])
    lw = log_stick_weights(trans.alpha[: K + 1, :K], trans.beta[:K], H)
    return _normalize_log_rows(lw)


def draw_emission_prior(prior, K, rng, per_state=False):
    if isinstance(prior, NIGParams):
        mu, s2 = sample_nig(prior, rng, size=K)
        return NormalEmission(mu, s2)
    eta0 = np.asarray(prior.eta0, dtype=float)
    eta = eta0 + np.sqrt(prior.eta_scale) * rng.standard_normal((K, eta0.size))
    n_var = K if per_state else 1
    s2 = sample_inverse_gamma(prior.gamma0, prior.s0sq, rng, size=n_var)
    return RegressionEmission(eta, s2, per_state)


def extend_representation(trans: TransitionParams, emit, K_new, hyper: Hyperpriors, rng, *, pin_beta=False):
    """Instantiate states K_rep+1..K_new by drawing their parameters from the prior.

    Returns new (trans, emit); the inputs are not modified.
    """
    K = trans.K
    if K_new <= K:
        raise ValueError(f"K_new={K_new} must exceed current representation size {K}")
    n_new = K_new - K
    alpha = np.empty((K_new + 1, K_new))
    alpha[: K + 1, :K] = trans.alpha[: K + 1, :K]
    # new columns for existing rows, then whole new rows
    alpha[: K + 1, K:] = rng.normal(hyper.mu_alpha, hyper.sigma_alpha, (K + 1, n_new))
    alpha[K + 1 :, :] = rng.normal(hyper.mu_alpha, hyper.sigma_alpha, (n_new, K_new))
    if pin_beta:
        new_beta = np.zeros(n_new)
    else:
        new_beta = sample_trunc_normal(hyper.mu_beta, hyper.sigma_beta, TruncSide.AboveZero, rng, size=n_new)
    grid = hyper.x_star_grid
    new_xs = grid[rng.integers(0, grid.shape[0], n_new)]
    new_trans = TransitionParams(alpha, np.concatenate([trans.beta, new_beta]), np.vstack([trans.x_star, new_xs]))
    new_emit = _extend_emission(emit, n_new, hyper.emission, rng)
    return new_trans, new_emit


def _extend_emission(emit, n_new, prior, rng):
    if isinstance(emit, NormalEmission):
        fresh = draw_emission_prior(prior, n_new, rng)
        return NormalEmission(np.concatenate([emit.mu, fresh.mu]), np.concatenate([emit.sigma2, fresh.sigma2]))
    fresh = draw_emission_prior(prior, n_new, rng, per_state=emit.per_state)
    s2 = np.concatenate([emit.sigma2, fresh.sigma2]) if emit.per_state else emit.sigma2.copy()
    return RegressionEmission(np.vstack([emit.eta, fresh.eta]), s2, emit.per_state)


@dataclass
class AuxW:
    """Probit auxiliaries W_{j l, t} for every (t, l <= z_t), stored flat.

    ``t`` is 0-based time, ``l`` the 1-based state, ``j`` the row (previous state).
    """

    t: np.ndarray
    l: np.ndarray
    j: np.ndarray
    value: np.ndarray

    def as_dict(self):
        return {(int(t), int(l)): float(v) for t, l, v in zip(self.t, self.l, self.value)}

    def decode_z(self, T):
        """Recover z from the sign pattern (the positive entry marks z_t)."""
        z = np.zeros(T, dtype=np.int64)
        pos = self.value > 0
        z[self.t[pos]] = self.l[pos]
        return z


@dataclass
class ChainState:
    z: np.ndarray
    u: np.ndarray
    trans: TransitionParams
    emit: NormalEmission | RegressionEmission
    w: AuxW | None = None

    def validate(self, slices: SliceSequence | None = None):
        """Raise AssertionError if any state invariant is broken."""
        K = self.trans.K
        assert self.z.min() >= 1 and self.z.max() <= K, "z outside representation"
        assert self.emit.K == K, "emission size differs from transition size"
        assert np.all(self.trans.beta >= 0), "negative beta"
        if slices is not None and self.u is not None:
            assert np.all(self.u > 0) and np.all(self.u < slices.xi(self.z)), "slice variable out of range"
        if self.w is not None:
            assert np.array_equal(self.w.decode_z(self.z.size), self.z), "w sign pattern does not encode z"
            assert np.all((self.w.value > 0) == (self.w.l == self.z[self.w.t])), "w sign pattern broken"
        return True
