"""Covariate preprocessing: rolling accumulation, forward lag and seasonal fill."""

from __future__ import annotations

import numpy as np


def accumulate_lag(raw, window=0, lag=0):
    """x_t = sum of raw over the ``window`` periods ending at t - lag.

    ``window = 0`` skips accumulation. Entries without enough history are NaN.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.ndim == 1:
        raw = raw[:, None]
    if window < 0 or lag < 0:
        raise ValueError("window and lag must be non-negative")
    T = raw.shape[0]
    acc = raw.copy()
    if window > 0:
        csum = np.vstack([np.zeros((1, raw.shape[1])), np.cumsum(raw, axis=0)])
        acc = np.full_like(raw, np.nan)
        acc[window - 1 :] = csum[window:] - csum[: T - window + 1]
    out = np.full_like(raw, np.nan)
    out[lag:] = acc[: T - lag] if lag else acc
    return out


def seasonal_means(values, phase, period):
    """Mean of the non-missing values at each phase, shape (period, p)."""
    values = np.asarray(values, dtype=float)
    out = np.full((period, values.shape[1]), np.nan)
    for s in range(period):
        rows = values[phase == s]
        for c in range(values.shape[1]):
            col = rows[:, c]
            col = col[~np.isnan(col)]
            if col.size:
                out[s, c] = col.mean()
    return out


def seasonal_fill(values, phase, period):
    """Replace NaNs with the mean of the observed values at the same phase."""
    values = np.array(values, dtype=float)
    means = seasonal_means(values, phase, period)
    miss = np.isnan(values)
    if miss.any():
        rows, cols = np.nonzero(miss)
        fill = means[phase[rows], cols]
        if np.any(np.isnan(fill)):
            raise ValueError("a phase has no observed values to fill from")
        values[rows, cols] = fill
    return values


def preprocess_covariates(raw, window=0, lag=0, period=12, start_index=0):
    """Accumulate, lag and fill the leading gap; returns the (T, p) predictor."""
    raw = np.asarray(raw, dtype=float)
    if raw.ndim == 1:
        raw = raw[:, None]
    phase = (np.arange(raw.shape[0]) + start_index) % period
    x = accumulate_lag(raw, window, lag)
    if np.isnan(x).any():
        x = seasonal_fill(x, phase, period)
    return x


def derive_future_covariates(raw, n, window=0, lag=0, period=12, start_index=0):
    """Predictors for the n periods after the fit data.

    Raw values beyond the fit data are replaced by their seasonal means over
    the fit data, so only fit-period information is used. Returns None when
    no preprocessing is configured, since the future predictor would then be
    a pure guess.
    """
    if window == 0 and lag == 0:
        return None
    raw = np.asarray(raw, dtype=float)
    if raw.ndim == 1:
        raw = raw[:, None]
    T = raw.shape[0]
    phase = (np.arange(T + n) + start_index) % period
    means = seasonal_means(raw, phase[:T], period)
    ext = np.vstack([raw, means[phase[T:]]])
    x = accumulate_lag(ext, window, lag)
    return x[T:]
