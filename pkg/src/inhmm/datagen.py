"""Synthetic data for the two simulation designs and their exact predictive densities."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .model import Dataset, NormalEmission, RegressionEmission, TransitionParams, emission_from_dict, transition_matrices
from .prediction import DensityGrid, horizon_state_probs


@dataclass
class TrueDesign:
    variant: str = "design1"
    n_states: int = 5
    x_star_percentiles: tuple = (50, 15, 85, 2, 98)
    alpha_diag: float = 2.0
    alpha_offdiag: float = 0.5
    beta_true: float = 2.0
    means: tuple = (0.0, -2.0, 2.0, -4.0, 4.0)
    sds: tuple = (0.25,) * 5
    coefs: tuple = ()
    sigma_y: float = 1.0
    T: int = 250
    n_ahead: int = 3
    rho: float = 0.95

    def __post_init__(self):
        if self.variant not in ("design1", "design2"):
            raise ValueError(f"unknown design {self.variant!r}")
        if self.n_states < 2 or self.beta_true <= 0 or self.T < 10:
            raise ValueError("design needs n_states >= 2, beta_true > 0 and T >= 10")
        if len(self.x_star_percentiles) != self.n_states:
            raise ValueError("one x_star percentile per state")


def design1(**overrides) -> TrueDesign:
    return TrueDesign(**overrides)


def design2(**overrides) -> TrueDesign:
    base = dict(variant="design2", n_states=3, x_star_percentiles=(50, 10, 90), means=(), sds=(),
                coefs=((1.0, 1.0), (0.0, -2.0), (2.0, 4.0)), sigma_y=1.0)
    base.update(overrides)
    return TrueDesign(**base)


DESIGNS = {"design1": design1, "design2": design2}


@dataclass
class Truth:
    """Resolved generating parameters plus the held-out block.

    Covariates here are in generator units (the standardized AR(1) output),
    not the fit-time standardization of the Dataset.
    """

    design: dict
    trans: TransitionParams
    emit: NormalEmission | RegressionEmission
    z: np.ndarray
    x: np.ndarray
    y: np.ndarray
    T: int
    n_ahead: int

    @property
    def z_T(self) -> int:
        return int(self.z[self.T - 1])

    @property
    def x_future(self):
        return self.x[self.T :]

    @property
    def y_heldout(self):
        return self.y[self.T :]

    def to_dict(self):
        return {
            "design": self.design,
            "T": self.T,
            "n_ahead": self.n_ahead,
            "alpha": self.trans.alpha.tolist(),
            "beta": self.trans.beta.tolist(),
            "x_star": self.trans.x_star.tolist(),
            "emission": self.emit.to_dict(),
            "z": self.z.tolist(),
            "x": self.x.tolist(),
            "y_heldout": self.y_heldout.tolist(),
            "z_T": self.z_T,
        }

    @classmethod
    def from_dict(cls, d):
        trans = TransitionParams(np.asarray(d["alpha"]), np.asarray(d["beta"]), np.asarray(d["x_star"]))
        T = int(d["T"])
        y = np.full(len(d["z"]), np.nan)
        y[T:] = d["y_heldout"]
        return cls(d["design"], trans, emission_from_dict(d["emission"]), np.asarray(d["z"], dtype=np.int64),
                   np.asarray(d["x"], dtype=float), y, T, int(d["n_ahead"]))


def gen_ar1_predictor(T_total, rho, rng):
    """Stationary AR(1) path with N(0, 1) innovations, standardized to mean 0 / sd 1."""
    if T_total < 2:
        raise ValueError("need at least two points")
    if not abs(rho) < 1:
        raise ValueError("|rho| must be below 1")
    eps = rng.standard_normal(T_total)
    x = np.empty(T_total)
    x[0] = eps[0] / np.sqrt(1.0 - rho * rho)
    for t in range(1, T_total):
        x[t] = rho * x[t - 1] + eps[t]
    return (x - x.mean()) / x.std(ddof=1)


def true_transition_params(design: TrueDesign, x_fit):
    K = design.n_states
    alpha = np.full((K + 1, K), design.alpha_offdiag)
    alpha[1:, :][np.diag_indices(K)] = design.alpha_diag
    x_star = np.percentile(x_fit, design.x_star_percentiles)[:, None]
    return TransitionParams(alpha, np.full(K, design.beta_true), x_star)


def true_emission(design: TrueDesign):
    if design.variant == "design1":
        return NormalEmission(np.array(design.means, dtype=float), np.array(design.sds, dtype=float) ** 2)
    return RegressionEmission(np.array(design.coefs, dtype=float), [design.sigma_y**2], per_state=False)


def simulate_nhmm(design: TrueDesign, rng):
    """Draw one replicate: returns (Dataset for fitting, true z for 1..T, Truth)."""
    T_total = design.T + design.n_ahead
    x = gen_ar1_predictor(T_total, design.rho, rng)
    trans = true_transition_params(design, x[: design.T])
    emit = true_emission(design)
    P = transition_matrices(trans, x[:, None], design.n_states)
    z = np.empty(T_total, dtype=np.int64)
    j = 0
    for t in range(T_total):
        z[t] = j = int(rng.choice(design.n_states, p=P[t, j])) + 1
    idx = z - 1
    mean = emit.state_means(x[:, None])[np.arange(T_total), idx]
    sd = np.sqrt(emit.state_vars(T_total)[np.arange(T_total), idx])
    y = mean + sd * rng.standard_normal(T_total)
    T = design.T
    data = Dataset.from_raw(x[:T], y[:T], future_x=x[T:], standardize_y=design.variant == "design2")
    truth = Truth(asdict(design), trans, emit, z, x, y, T, design.n_ahead)
    return data, z[:T].copy(), truth


def true_predictive_density(trans, emit, z_T, x_future, grid: DensityGrid, n):
    """Exact n-step density under known finite-state parameters (every state kept)."""
    return _true_densities(trans, emit, z_T, x_future, grid, n)[n - 1]


def _true_densities(trans, emit, z_T, x_future, grid, n):
    x_future = np.asarray(x_future, dtype=float)
    if x_future.ndim == 1:
        x_future = x_future[:, None]
    probs = horizon_state_probs(trans, z_T, x_future, n, trans.K)
    out = []
    for h in range(n):
        x_row = np.broadcast_to(x_future[h], (grid.points.size, x_future.shape[1]))
        f = np.exp(emit.logpdf(grid.points, x_row))
        out.append(grid.with_values(f @ probs[h], n=h + 1, M=1))
    return out


def true_predictive_densities(truth: Truth, grid: DensityGrid, n=None):
    """Exact predictive densities of y_{T+h}, h = 1..n, for a simulated replicate."""
    n = truth.n_ahead if n is None else n
    return _true_densities(truth.trans, truth.emit, truth.z_T, truth.x_future, grid, n)
