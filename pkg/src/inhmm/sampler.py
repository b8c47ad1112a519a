"""Exact slice / backward-forward / probit-auxiliary Gibbs sampler.

One sweep updates, in order: slice variables u, the latent path z (backward
messages then forward sampling), the probit auxiliaries W, alpha, beta,
x_star, and finally the emission parameters.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .distributions import NIGParams, TruncSide, sample_inverse_gamma, sample_trunc_normal
from .model import (
    AuxW,
    ChainState,
    Dataset,
    ModelSpec,
    NormalEmission,
    RegressionEmission,
    SliceSequence,
    TransitionParams,
    draw_emission_prior,
    extend_representation,
    kernel_matrix,
    log_stick_weights,
)


INIT_MODES = ("dpmm", "single", "provided")


class SamplerError(RuntimeError):
    """A sweep failed; carries the iteration index and a serialized state."""

    def __init__(self, message, iteration=None, state_dump=None):
        super().__init__(message)
        self.iteration = iteration
        self.state_dump = state_dump


class NumericalDegeneracyError(SamplerError):
    pass


@dataclass
class McmcConfig:
    n_iter: int = 1000
    n_burnin: int = 0
    thin: int = 1
    seed: int = 0
    init: str = "dpmm"
    dpmm_iters: int = 500

    def __post_init__(self):
        if self.n_iter < 1 or self.thin < 1:
            raise ValueError("n_iter and thin must be positive")
        if not 0 <= self.n_burnin < self.n_iter:
            raise ValueError("need 0 <= n_burnin < n_iter")
        if self.init not in INIT_MODES:
            raise ValueError(f"init must be one of {INIT_MODES}")
        if self.dpmm_iters < 1:
            raise ValueError("dpmm_iters must be positive")


@dataclass(frozen=True)
class PosteriorSample:
    iter: int
    z: np.ndarray
    trans: TransitionParams
    emit: NormalEmission | RegressionEmission

    @property
    def K(self) -> int:
        return int(self.z.max())

    @property
    def alpha(self):
        return self.trans.alpha

    @property
    def beta(self):
        return self.trans.beta

    @property
    def x_star(self):
        return self.trans.x_star

    @classmethod
    def from_state(cls, iteration, state: ChainState):
        K = int(state.z.max())
        return cls(iteration, state.z.copy(), state.trans.truncate(K), state.emit.truncate(K))


def _pin_beta(spec):
    return spec.homogeneous


def _empty_params(p, emit_like):
    trans = TransitionParams(np.zeros((1, 0)), np.zeros(0), np.zeros((0, p)))
    if isinstance(emit_like, RegressionEmission):
        emit = RegressionEmission(np.zeros((0, emit_like.eta.shape[1])), emit_like.sigma2[:0] if emit_like.per_state else emit_like.sigma2.copy(), emit_like.per_state)
    else:
        emit = NormalEmission(np.zeros(0), np.zeros(0))
    return trans, emit


def resize_representation(state: ChainState, K_new, spec: ModelSpec, rng):
    """Grow from the prior or drop states above K_new (those are prior draws anyway)."""
    K = state.trans.K
    if K_new > K:
        state.trans, state.emit = extend_representation(state.trans, state.emit, K_new, spec.hyper, rng, pin_beta=_pin_beta(spec))
    elif K_new < K:
        state.trans = state.trans.truncate(K_new)
        state.emit = state.emit.truncate(K_new)
    return state


# ---------------------------------------------------------------- slice step


def update_slice(state: ChainState, spec: ModelSpec, rng):
    """u_t ~ U(0, xi_{z_t}); then size the representation to cover every active state."""
    xi_z = spec.slices.xi(state.z)
    u = xi_z * rng.random(state.z.size)
    state.u = np.maximum(u, np.finfo(float).tiny)
    K_needed = max(int(state.z.max()), int(spec.slices.n_active(state.u.min())))
    resize_representation(state, K_needed, spec, rng)
    return state.u


def active_set(u_t, slices: SliceSequence):
    """States {k : xi_k > u_t}, as a range 1..n."""
    n = int(slices.n_active(u_t))
    if n < 1:
        raise SamplerError(f"slice variable {u_t} admits no state (xi_1 = {slices.xi(1)})")
    return range(1, n + 1)


# ---------------------------------------------------------- latent sequence


@dataclass
class Messages:
    """Backward messages and the per-step log transition-times-likelihood factors.

    ``beta[t]`` is max-normalized over states; ``log_q[t, j, k-1]`` is
    log pi_k(j, x_t) - log xi_k + log f(y_t | k) for active k, else -inf.
    """

    beta: np.ndarray
    log_q: np.ndarray
    n_active: np.ndarray


def log_q_dense(state: ChainState, data: Dataset, slices: SliceSequence):
    """Vectorized numpy evaluation of every log factor, inactive states masked.

    Reference implementation; the sampler uses the compiled active-entry kernel.
    """
    trans = state.trans
    K = trans.K
    H = kernel_matrix(data.x, trans.x_star)
    log_pi = log_stick_weights(trans.alpha[: K + 1], trans.beta, H)
    log_f = state.emit.logpdf(data.y, data.x)
    ks = np.arange(1, K + 1)
    n_act = slices.n_active(state.u)
    log_q = log_pi + (log_f - slices.log_xi(ks))[:, None, :]
    inactive = ks[None, :] > n_act[:, None]
    log_q[np.broadcast_to(inactive[:, None, :], log_q.shape)] = -np.inf
    return log_q, n_act


def backward_messages(state: ChainState, data: Dataset, slices: SliceSequence) -> Messages:
    """beta_T = 1 and beta_t(j) = sum_k beta_{t+1}(k) pi_k(j, x_{t+1}) / xi_k f(y_{t+1} | k), per-t max-normalized."""
    trans = state.trans
    K = trans.K
    n_act = slices.n_active(state.u).astype(np.int64)
    if np.any(n_act > K):
        raise SamplerError("representation does not cover the active sets; run update_slice first")
    H = kernel_matrix(data.x, trans.x_star)
    log_f = state.emit.logpdf(data.y, data.x)
    log_xi = slices.log_xi(np.arange(1, K + 1))
    log_q = _kernels.log_q_active(np.ascontiguousarray(trans.alpha[: K + 1]), trans.beta, H, log_f, log_xi, n_act)
    msg, failed = _kernels.backward(log_q, n_act)
    if failed >= 0:
        raise NumericalDegeneracyError(
            f"backward messages vanished at t={failed} (active states 1..{n_act[failed - 1]})")
    return Messages(msg, log_q, n_act)


def sample_latent_sequence(state: ChainState, messages: Messages, data: Dataset, rng, size=None):
    """Draw z_{1:T} exactly from p(z | u, y, x, params) by forward sampling.

    With ``size`` given, returns a (size, T) array of independent draws from the
    same conditional; otherwise a single (T,) path.
    """
    T = messages.beta.shape[0]
    uniforms = rng.random((1 if size is None else size, T))
    z = _kernels.forward(messages.log_q, messages.beta, messages.n_active, uniforms)
    if np.any(z[:, 0] < 0):
        t = -int(z[z[:, 0] < 0, 0][0]) - 1
        raise NumericalDegeneracyError(f"no admissible state at t={t}")
    return z[0] if size is None else z


# ------------------------------------------------------ transition updates


def _previous(z):
    zprev = np.empty_like(z)
    zprev[0] = 0
    zprev[1:] = z[:-1]
    return zprev


def _w_index(z):
    T = z.size
    total = int(z.sum())
    t_idx = np.repeat(np.arange(T), z)
    starts = np.repeat(np.cumsum(z) - z, z)
    l_idx = np.arange(total) - starts + 1
    j_idx = _previous(z)[t_idx]
    return t_idx, l_idx, j_idx


def update_auxiliary_w(state: ChainState, data: Dataset, rng) -> AuxW:
    """W_{z_{t-1} l, t} for l <= z_t: positive at l = z_t, non-positive below."""
    z = state.z
    trans = state.trans
    t_idx, l_idx, j_idx = _w_index(z)
    H = kernel_matrix(data.x, trans.x_star)
    mean = trans.alpha[j_idx, l_idx - 1] + trans.beta[l_idx - 1] * H[t_idx, l_idx - 1]
    pos = l_idx == z[t_idx]
    value = np.empty(mean.size)
    value[pos] = sample_trunc_normal(mean[pos], 1.0, TruncSide.AboveZero, rng)
    value[~pos] = sample_trunc_normal(mean[~pos], 1.0, TruncSide.BelowZero, rng)
    state.w = AuxW(t_idx, l_idx, j_idx, value)
    return state.w


def alpha_posterior(state: ChainState, w: AuxW, data: Dataset, hyper):
    """Posterior means and precisions for every populated alpha entry, shape (K+1, K)."""
    trans = state.trans
    K = trans.K
    H = kernel_matrix(data.x, trans.x_star)
    resid = w.value - trans.beta[w.l - 1] * H[w.t, w.l - 1]
    flat = w.j * K + (w.l - 1)
    size = (K + 1) * K
    n = np.bincount(flat, minlength=size).reshape(K + 1, K)
    s = np.bincount(flat, weights=resid, minlength=size).reshape(K + 1, K)
    prior_prec = 1.0 / hyper.sigma_alpha**2
    prec = n + prior_prec
    mean = (s + hyper.mu_alpha * prior_prec) / prec
    return mean, prec


def update_alpha(state: ChainState, w: AuxW, data: Dataset, hyper, rng):
    mean, prec = alpha_posterior(state, w, data, hyper)
    alpha = mean + rng.standard_normal(mean.shape) / np.sqrt(prec)
    state.trans = TransitionParams(alpha, state.trans.beta, state.trans.x_star)
    return alpha


def beta_posterior(state: ChainState, w: AuxW, data: Dataset, hyper):
    """Untruncated posterior mean and precision for each beta_l."""
    trans = state.trans
    K = trans.K
    H = kernel_matrix(data.x, trans.x_star)
    h = H[w.t, w.l - 1]
    r = w.value - trans.alpha[w.j, w.l - 1]
    prior_prec = 1.0 / hyper.sigma_beta**2
    prec = prior_prec + np.bincount(w.l - 1, weights=h * h, minlength=K)
    mean = (hyper.mu_beta * prior_prec + np.bincount(w.l - 1, weights=h * r, minlength=K)) / prec
    return mean, prec


def update_beta(state: ChainState, w: AuxW, data: Dataset, hyper, rng):
    mean, prec = beta_posterior(state, w, data, hyper)
    beta = sample_trunc_normal(mean, 1.0 / np.sqrt(prec), TruncSide.AboveZero, rng)
    beta = np.atleast_1d(beta)
    state.trans = TransitionParams(state.trans.alpha, beta, state.trans.x_star)
    return beta


def x_star_log_posterior(state: ChainState, w: AuxW, data: Dataset, grid):
    """(K, G) unnormalized log posterior of each x_star_l over the candidate grid."""
    trans = state.trans
    K = trans.K
    Hg = kernel_matrix(data.x, grid)
    r = w.value - trans.alpha[w.j, w.l - 1]
    ll = -0.5 * (r[:, None] - trans.beta[w.l - 1, None] * Hg[w.t]) ** 2
    owner = (w.l - 1)[None, :] == np.arange(K)[:, None]
    return owner.astype(float) @ ll


def update_x_star(state: ChainState, w: AuxW, data: Dataset, hyper, rng):
    grid = hyper.x_star_grid
    lp = x_star_log_posterior(state, w, data, grid)
    lp -= lp.max(axis=1, keepdims=True)
    p = np.exp(lp)
    cdf = np.cumsum(p, axis=1)
    u = rng.random(lp.shape[0]) * cdf[:, -1]
    pick = np.minimum((cdf <= u[:, None]).sum(axis=1), grid.shape[0] - 1)
    x_star = grid[pick]
    state.trans = TransitionParams(state.trans.alpha, state.trans.beta, x_star)
    return x_star


# -------------------------------------------------------- emission updates


def _nig_draw(prior: NIGParams, z, y, K, rng):
    idx = z - 1
    n = np.bincount(idx, minlength=K).astype(float)
    sums = np.bincount(idx, weights=y, minlength=K)
    ybar = np.divide(sums, n, out=np.zeros(K), where=n > 0)
    ss = np.bincount(idx, weights=(y - ybar[idx]) ** 2, minlength=K)
    nu_n = prior.nu0 + n
    mu_n = (prior.nu0 * prior.mu0 + n * ybar) / nu_n
    gamma_n = prior.gamma0 + 0.5 * n
    s_n = prior.s0sq + 0.5 * ss + 0.5 * prior.nu0 * n * (ybar - prior.mu0) ** 2 / nu_n
    sigma2 = sample_inverse_gamma(gamma_n, s_n, rng)
    mu = mu_n + np.sqrt(sigma2 / nu_n) * rng.standard_normal(K)
    return NormalEmission(mu, sigma2)


def update_emission_inhmm1(state: ChainState, data: Dataset, hyper, rng):
    state.emit = _nig_draw(hyper.emission, state.z, data.y, state.trans.K, rng)
    return state.emit


def _regression_draw(emit: RegressionEmission, prior, z, x, y, K, rng):
    X = np.column_stack([np.ones(y.size), x])
    d = X.shape[1]
    idx = z - 1
    onehot = (idx[None, :] == np.arange(K)[:, None]).astype(float)
    XtX = (onehot @ (X[:, :, None] * X[:, None, :]).reshape(y.size, d * d)).reshape(K, d, d)
    Xty = onehot @ (X * y[:, None])
    s2 = emit.sigma2 if emit.per_state else np.full(K, emit.sigma2[0])
    eta0 = np.asarray(prior.eta0, dtype=float)
    prec = XtX / s2[:, None, None] + np.eye(d) / prior.eta_scale
    rhs = Xty / s2[:, None] + eta0 / prior.eta_scale
    chol = np.linalg.cholesky(prec)
    mean = np.linalg.solve(prec, rhs[:, :, None])[:, :, 0]
    # eta = mean + L^{-T} e gives covariance prec^{-1}
    e = rng.standard_normal((K, d, 1))
    eta = mean + np.linalg.solve(np.swapaxes(chol, 1, 2), e)[:, :, 0]
    resid2 = (y - np.einsum("td,td->t", X, eta[idx])) ** 2
    if emit.per_state:
        n = np.bincount(idx, minlength=K)
        rss = np.bincount(idx, weights=resid2, minlength=K)
        sigma2 = sample_inverse_gamma(prior.gamma0 + 0.5 * n, prior.s0sq + 0.5 * rss, rng)
    else:
        sigma2 = np.atleast_1d(sample_inverse_gamma(prior.gamma0 + 0.5 * y.size, prior.s0sq + 0.5 * resid2.sum(), rng))
    return RegressionEmission(eta, sigma2, emit.per_state)


def update_emission_inhmm2(state: ChainState, data: Dataset, hyper, rng):
    state.emit = _regression_draw(state.emit, hyper.emission, state.z, data.x, data.y, state.trans.K, rng)
    return state.emit


def update_emission(state, data, spec: ModelSpec, rng):
    if spec.regression:
        return update_emission_inhmm2(state, data, spec.hyper, rng)
    return update_emission_inhmm1(state, data, spec.hyper, rng)


# ------------------------------------------------------------------- sweep

SWEEP_STEPS = ("slice", "messages", "latent", "w", "alpha", "beta", "x_star", "emission")


def sweep(state: ChainState, data: Dataset, spec: ModelSpec, rng, timings=None):
    """One full Gibbs scan in the fixed order; mutates and returns ``state``."""
    clock = time.perf_counter if timings is not None else None

    def tick(name, t0):
        if clock is not None:
            now = clock()
            timings[name] = timings.get(name, 0.0) + now - t0
            return now
        return t0

    t0 = clock() if clock else 0.0
    update_slice(state, spec, rng)
    t0 = tick("slice", t0)
    messages = backward_messages(state, data, spec.slices)
    t0 = tick("messages", t0)
    state.z = sample_latent_sequence(state, messages, data, rng)
    t0 = tick("latent", t0)
    w = update_auxiliary_w(state, data, rng)
    t0 = tick("w", t0)
    update_alpha(state, w, data, spec.hyper, rng)
    t0 = tick("alpha", t0)
    if not spec.homogeneous:
        update_beta(state, w, data, spec.hyper, rng)
    t0 = tick("beta", t0)
    update_x_star(state, w, data, spec.hyper, rng)
    t0 = tick("x_star", t0)
    update_emission(state, data, spec, rng)
    tick("emission", t0)
    return state


# ---------------------------------------------------------- initialization


def _dpmm_labels(data: Dataset, spec: ModelSpec, n_iter, rng, concentration=1.0):
    """Slice-sampled DP mixture on y (ignoring time), returning labels and emission params.

    Labels are relabeled 1..K by decreasing cluster size.
    """
    y, x, T = data.y, data.x, data.T
    prior = spec.hyper.emission
    regression = spec.regression
    labels = np.zeros(T, dtype=np.int64)
    emit = draw_emission_prior(prior, 1, rng, per_state=spec.per_state_var)
    for _ in range(n_iter):
        K = int(labels.max()) + 1
        z = labels + 1
        emit = _fit_cluster_params(emit, prior, z, x, y, K, rng, regression)
        counts = np.bincount(labels, minlength=K)
        tail = np.cumsum(counts[::-1])[::-1] - counts
        v = rng.beta(1.0 + counts, concentration + tail)
        weights = v * np.concatenate([[1.0], np.cumprod(1.0 - v)[:-1]])
        remainder = float(np.prod(1.0 - v))
        u = rng.random(T) * weights[labels]
        u = np.maximum(u, np.finfo(float).tiny)
        # extend sticks until the leftover mass is below every slice
        extra = []
        while remainder > u.min():
            vn = rng.beta(1.0, concentration)
            extra.append(vn * remainder)
            remainder *= 1.0 - vn
        weights = np.concatenate([weights, extra])
        K_new = weights.size
        if K_new > emit.K:
            emit = _grow_emission(emit, prior, K_new - emit.K, rng, regression)
        log_f = emit.logpdf(y, x)[:, :K_new]
        allowed = weights[None, :] > u[:, None]
        lp = np.where(allowed, log_f, -np.inf)
        lp -= lp.max(axis=1, keepdims=True)
        p = np.exp(lp)
        cdf = np.cumsum(p, axis=1)
        draw = rng.random(T) * cdf[:, -1]
        labels = np.minimum((cdf <= draw[:, None]).sum(axis=1), K_new - 1)
        if emit.K > K_new:
            emit = emit.truncate(K_new)
    used, inverse, sizes = np.unique(labels, return_inverse=True, return_counts=True)
    order = np.argsort(-sizes, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    z = rank[inverse] + 1
    z_old = labels + 1
    emit = _fit_cluster_params(emit, prior, z_old, x, y, max(emit.K, int(z_old.max())), rng, regression)
    keep = used[order]
    emit = _select_states(emit, keep)
    return z.astype(np.int64), emit


def _fit_cluster_params(emit, prior, z, x, y, K, rng, regression):
    if emit.K < K:
        emit = _grow_emission(emit, prior, K - emit.K, rng, regression)
    elif emit.K > K:
        emit = emit.truncate(K)
    if regression:
        return _regression_draw(emit, prior, z, x, y, K, rng)
    return _nig_draw(prior, z, y, K, rng)


def _grow_emission(emit, prior, n_new, rng, regression):
    if regression:
        fresh = draw_emission_prior(prior, n_new, rng, per_state=emit.per_state)
        s2 = np.concatenate([emit.sigma2, fresh.sigma2]) if emit.per_state else emit.sigma2
        return RegressionEmission(np.vstack([emit.eta, fresh.eta]), s2, emit.per_state)
    fresh = draw_emission_prior(prior, n_new, rng)
    return NormalEmission(np.concatenate([emit.mu, fresh.mu]), np.concatenate([emit.sigma2, fresh.sigma2]))


def _select_states(emit, keep):
    if isinstance(emit, NormalEmission):
        return NormalEmission(emit.mu[keep], emit.sigma2[keep])
    s2 = emit.sigma2[keep] if emit.per_state else emit.sigma2
    return RegressionEmission(emit.eta[keep], s2, emit.per_state)


def _closest_grid_points(x, z, grid):
    """x_star_k = argmin over candidates of the summed distance to covariates in state k."""
    K = int(z.max())
    dist = np.sqrt(np.maximum(-kernel_matrix(x, grid), 0.0))
    onehot = ((z - 1)[None, :] == np.arange(K)[:, None]).astype(float)
    return grid[np.argmin(onehot @ dist, axis=1)]


def _state_from_labels(z, emit, data: Dataset, spec: ModelSpec):
    K = int(z.max())
    hyper = spec.hyper
    alpha = np.full((K + 1, K), hyper.mu_alpha)
    beta = np.zeros(K) if spec.homogeneous else np.full(K, hyper.mu_beta)
    x_star = _closest_grid_points(data.x, z, hyper.x_star_grid)
    return ChainState(z.astype(np.int64), None, TransitionParams(alpha, beta, x_star), emit.truncate(K))


def initialize_chain(data: Dataset, spec: ModelSpec, config: McmcConfig, rng, provided: ChainState | None = None):
    """Build a starting ChainState with u and W drawn from their conditionals."""
    mode = config.init
    if mode == "provided":
        if provided is None:
            raise ValueError("init='provided' needs a ChainState")
        state = ChainState(provided.z.copy(), None, provided.trans.copy(), provided.emit.copy())
    else:
        state = None
        if mode == "dpmm":
            try:
                with np.errstate(invalid="raise", over="raise"):
                    z, emit = _dpmm_labels(data, spec, config.dpmm_iters, rng)
                state = _state_from_labels(z, emit, data, spec)
            except (FloatingPointError, np.linalg.LinAlgError, ValueError) as exc:
                warnings.warn(f"DPMM initialization failed ({exc}); falling back to a single state", RuntimeWarning)
        if state is None:
            z = np.ones(data.T, dtype=np.int64)
            emit = draw_emission_prior(spec.hyper.emission, 1, rng, per_state=spec.per_state_var)
            emit = _fit_cluster_params(emit, spec.hyper.emission, z, data.x, data.y, 1, rng, spec.regression)
            state = _state_from_labels(z, emit, data, spec)
    update_slice(state, spec, rng)
    update_auxiliary_w(state, data, rng)
    return state


# -------------------------------------------------------------- main loop


def dump_state(state: ChainState):
    """JSON-friendly snapshot used in error reports."""
    return {
        "z": state.z.tolist() if state.z is not None else None,
        "u": state.u.tolist() if state.u is not None else None,
        "alpha": state.trans.alpha.tolist(),
        "beta": state.trans.beta.tolist(),
        "x_star": state.trans.x_star.tolist(),
        "emission": state.emit.to_dict(),
    }


def run_mcmc(data: Dataset, spec: ModelSpec, config: McmcConfig, rng=None, *, state=None, timings=None,
             on_sample=None):
    """Run the chain and return the retained PosteriorSample list.

    ``on_sample`` (if given) is called with each retained sample instead of
    accumulating them, and the return value is then an empty list.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    state = initialize_chain(data, spec, config, rng, provided=state)
    samples = []
    for it in range(config.n_iter):
        try:
            sweep(state, data, spec, rng, timings)
        except SamplerError as exc:
            exc.iteration = it
            exc.state_dump = dump_state(state)
            raise
        except (FloatingPointError, np.linalg.LinAlgError, ValueError, IndexError) as exc:
            raise SamplerError(f"sweep {it} failed: {exc}", it, dump_state(state)) from exc
        if it >= config.n_burnin and (it - config.n_burnin) % config.thin == 0:
            sample = PosteriorSample.from_state(it, state)
            if on_sample is not None:
                on_sample(sample)
            else:
                samples.append(sample)
    return samples


# ------------------------------------------------------- prior simulation


def draw_from_prior(x, spec: ModelSpec, rng):
    """Sample (params, z) from the prior for fixed covariates, growing the
    representation lazily as the stick-breaking walk reaches new states."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    T, p = x.shape
    hyper = spec.hyper
    if spec.regression:
        per_state = spec.per_state_var
        s2 = np.zeros(0) if per_state else draw_emission_prior(hyper.emission, 1, rng).sigma2
        like = RegressionEmission(np.zeros((0, p + 1)), s2, per_state)
    else:
        like = NormalEmission(np.zeros(0), np.zeros(0))
    trans, emit = _empty_params(p, like)
    pin = _pin_beta(spec)
    trans, emit = extend_representation(trans, emit, 1, hyper, rng, pin_beta=pin)
    z = np.empty(T, dtype=np.int64)
    j = 0
    for t in range(T):
        k = 1
        while True:
            if k > trans.K:
                trans, emit = extend_representation(trans, emit, k, hyper, rng, pin_beta=pin)
            a = trans.alpha[j, k - 1] + trans.beta[k - 1] * -np.sum((x[t] - trans.x_star[k - 1]) ** 2)
            if rng.standard_normal() + a > 0:
                break
            k += 1
        z[t] = j = k
    return ChainState(z, None, trans, emit)


def simulate_emissions(z, x, emit, rng):
    """y_t ~ f(. | z_t, x_t)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    idx = np.asarray(z) - 1
    mean = emit.state_means(x)[np.arange(idx.size), idx]
    var = emit.state_vars(idx.size)[np.arange(idx.size), idx]
    return mean + np.sqrt(var) * rng.standard_normal(idx.size)
