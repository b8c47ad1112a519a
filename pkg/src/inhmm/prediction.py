"""n-step-ahead predictive densities, density grids and integrated squared error."""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .model import Dataset, ModelSpec, TransitionParams, transition_matrices

DEFAULT_GRID_POINTS = 512
DEFAULT_GRID_PAD_SD = 3.0


@dataclass
class DensityGrid:
    """Density values on strictly increasing points y_0 < ... < y_N.

    Riemann sums use points 1..N with widths y_i - y_{i-1}; the value at
    point 0 is kept for plotting only.
    """

    points: np.ndarray
    values: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).ravel()
        if self.points.size < 2 or np.any(np.diff(self.points) <= 0):
            raise ValueError("grid points must be strictly increasing with at least two points")
        if self.values is None:
            self.values = np.zeros_like(self.points)
        self.values = np.asarray(self.values, dtype=float).ravel()
        if self.values.shape != self.points.shape:
            raise ValueError("values must align with points")

    @property
    def deltas(self):
        return np.diff(self.points)

    def mass(self) -> float:
        return float(np.sum(self.values[1:] * self.deltas))

    def with_values(self, values, **meta):
        return DensityGrid(self.points.copy(), values, {**self.meta, **meta})

    def to_csv(self) -> str:
        buf = io.StringIO()
        for key in sorted(self.meta):
            buf.write(f"# {key}: {self.meta[key]}\n")
        buf.write("y,density\n")
        for y, d in zip(self.points, self.values):
            buf.write(f"{float(y)!r},{float(d)!r}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str):
        meta, rows = {}, []
        for line in text.splitlines():
            if line.startswith("#"):
                key, _, value = line[1:].partition(":")
                meta[key.strip()] = value.strip()
            elif line and not line.startswith("y,"):
                y, d = line.split(",")
                rows.append((float(y), float(d)))
        arr = np.array(rows, dtype=float)
        return cls(arr[:, 0], arr[:, 1], meta)


def uniform_grid(lower, upper, n_points=DEFAULT_GRID_POINTS):
    return DensityGrid(np.linspace(lower, upper, n_points))


def default_grid(data: Dataset, n_points=DEFAULT_GRID_POINTS, pad_sd=DEFAULT_GRID_PAD_SD):
    """Grid over [min y - pad*sd, max y + pad*sd] (standardized), returned in original units."""
    y = data.y
    sd = y.std(ddof=1)
    lo, hi = y.min() - pad_sd * sd, y.max() + pad_sd * sd
    return DensityGrid(data.destandardize_y(np.linspace(lo, hi, n_points)))


def horizon_state_probs(trans: TransitionParams, z_T, x_future, n, K=None):
    """Distribution of z_{T+h} for h = 1..n given z_T, by forward propagation.

    Returns an (n, K) array; each step uses the K-truncated renormalized
    transition matrix at x_{T+h}.
    """
    K = int(trans.K if K is None else K)
    x_future = np.asarray(x_future, dtype=float)
    if x_future.ndim == 1:
        x_future = x_future[:, None]
    if x_future.shape[0] < n:
        raise ValueError(f"need covariates for {n} future steps, got {x_future.shape[0]}")
    P = transition_matrices(trans, x_future[:n], K)
    out = np.empty((n, K))
    v = np.zeros(K)
    v[int(z_T) - 1] = 1.0
    for h in range(n):
        v = v @ P[h, 1:, :]
        out[h] = v
    return out


def _emission_density(emit, y_std, x_row):
    """(G, K) emission densities at standardized grid values for one covariate row."""
    return np.exp(emit.logpdf(y_std, np.broadcast_to(x_row, (y_std.size, x_row.size))))


def sample_predictive_densities(sample, x_future, y_std, n):
    """Per-sample predictive densities for horizons 1..n, shape (n, G), standardized units."""
    probs = horizon_state_probs(sample.trans, sample.z[-1], x_future, n, sample.K)
    x_future = np.asarray(x_future, dtype=float).reshape(np.asarray(x_future).shape[0], -1)
    out = np.empty((n, y_std.size))
    for h in range(n):
        out[h] = _emission_density(sample.emit, y_std, x_future[h])[:, : probs.shape[1]] @ probs[h]
    return out


def predictive_densities(samples, x_future, grid: DensityGrid, n, y_mean=0.0, y_sd=1.0):
    """Monte Carlo predictive densities for horizons 1..n on ``grid`` (original units).

    ``x_future`` is in the model's standardized covariate units; grid points
    are mapped to standardized response units and densities are rescaled by
    1 / y_sd.
    """
    if len(samples) == 0:
        raise ValueError("need at least one posterior sample")
    x_future = np.asarray(x_future, dtype=float)
    if x_future.ndim == 1:
        x_future = x_future[:, None]
    if x_future.shape[0] < n:
        raise ValueError(f"need covariates for {n} future steps, got {x_future.shape[0]}")
    y_std = (grid.points - y_mean) / y_sd
    stack = np.stack([sample_predictive_densities(s, x_future, y_std, n) for s in samples])
    # sorting each column makes the reduction independent of sample order
    stack.sort(axis=0)
    dens = stack.sum(axis=0) / (len(samples) * y_sd)
    bounds = {"lower": float(grid.points[0]), "upper": float(grid.points[-1])}
    return [grid.with_values(dens[h], n=h + 1, M=len(samples), **bounds) for h in range(n)]


def predictive_density(samples, x_future, grid: DensityGrid, spec: ModelSpec | None = None, n=None, y_mean=0.0,
                       y_sd=1.0):
    """n-step-ahead Monte Carlo predictive density (n defaults to len(x_future))."""
    x_future = np.asarray(x_future, dtype=float)
    n = x_future.shape[0] if n is None else n
    return predictive_densities(samples, x_future, grid, n, y_mean, y_sd)[n - 1]


def mise(true_density: DensityGrid, est_density: DensityGrid) -> float:
    """Integrated squared error sum_i (f_i - g_i)^2 * delta_i over points 1..N."""
    if not np.array_equal(true_density.points, est_density.points):
        raise ValueError("densities are on different grids")
    diff = true_density.values[1:] - est_density.values[1:]
    return float(np.sum(diff * diff * true_density.deltas))


def posterior_mean_series(samples, data: Dataset, spec: ModelSpec | None = None):
    """Average over samples of the emission mean of the occupied state, in original units."""
    if len(samples) == 0:
        raise ValueError("need at least one posterior sample")
    T = data.T
    total = np.zeros(T)
    for s in samples:
        total += s.emit.state_means(data.x)[np.arange(T), s.z - 1]
    return data.destandardize_y(total / len(samples))
