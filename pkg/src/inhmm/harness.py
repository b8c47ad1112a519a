"""File-level workflow (simulate, fit, predict, evaluate) and the replicate study."""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from .config import ConfigError, RunConfig, build_model_spec, config_from_dict
from .datagen import DESIGNS, Truth, simulate_nhmm, true_predictive_densities
from .files import DataError, atomic_write_text, read_json, read_samples, read_table, write_json, write_samples, write_table
from .model import Dataset
from .prediction import DensityGrid, predictive_densities, uniform_grid
from .preprocess import derive_future_covariates, preprocess_covariates
from .sampler import run_mcmc

log = logging.getLogger(__name__)

WORKERS_ENV = "INHMM_WORKERS"


# ------------------------------------------------------------------ data


def load_dataset(path, config: RunConfig, standardize_y=True):
    """Read, subset and preprocess a dataset CSV.

    Returns (Dataset, t, derived future covariates in raw predictor units or None).
    """
    t, raw, y = read_table(path)
    pp = config.preprocess
    row = np.arange(t.size)
    keep = np.ones(t.size, dtype=bool)
    if pp.t_min is not None:
        keep &= t >= pp.t_min
    if pp.t_max is not None:
        keep &= t <= pp.t_max
    if keep.sum() < 3:
        raise DataError(f"{path}: fewer than three rows inside the requested t range")
    t, raw, y, row = t[keep], raw[keep], y[keep], row[keep]
    start = pp.start_index + int(row[0])
    try:
        x = preprocess_covariates(raw, pp.accumulate_window, pp.forward_lag, pp.period, start)
        future = derive_future_covariates(raw, config.horizons, pp.accumulate_window, pp.forward_lag, pp.period,
                                          start)
    except ValueError as exc:
        raise DataError(f"{path}: preprocessing failed ({exc})") from exc
    if np.any(x.std(axis=0, ddof=1) == 0):
        raise DataError(f"{path}: a covariate is constant after preprocessing")
    return Dataset.from_raw(x, y, standardize_y=standardize_y), t, future


# ------------------------------------------------------------------- fit


def fit(data: Dataset, config: RunConfig, out_dir, *, derived_future=None, timing=False, extra_meta=None):
    """Run one chain and write samples.jsonl, fit_meta.json and diagnostics.json."""
    spec = build_model_spec(config, data)
    timings = {} if timing else None
    start = time.perf_counter()
    samples = run_mcmc(data, spec, config.mcmc, timings=timings)
    elapsed = time.perf_counter() - start
    os.makedirs(out_dir, exist_ok=True)
    write_samples(os.path.join(out_dir, "samples.jsonl"), samples, config.mcmc.seed)
    Ks = np.array([s.K for s in samples])
    meta = {
        "model": config.model,
        "seed": config.mcmc.seed,
        "T": data.T,
        "p": data.p,
        "x_mean": np.atleast_1d(data.x_raw_mean).tolist(),
        "x_sd": np.atleast_1d(data.x_raw_sd).tolist(),
        "y_mean": float(data.y_raw_mean),
        "y_sd": float(data.y_raw_sd),
        "y_summary": {"min": float(data.y.min()), "max": float(data.y.max()), "sd": float(data.y.std(ddof=1))},
        "derived_future_x": None if derived_future is None else np.asarray(derived_future).tolist(),
        "n_samples": len(samples),
        "config": config.to_dict(),
    }
    if extra_meta:
        meta.update(extra_meta)
    write_json(os.path.join(out_dir, "fit_meta.json"), meta)
    diag = {
        "status": "ok",
        "n_retained": len(samples),
        "K": {
            "mean": float(Ks.mean()),
            "min": int(Ks.min()),
            "max": int(Ks.max()),
            "counts": {str(k): int(c) for k, c in zip(*np.unique(Ks, return_counts=True))},
        },
    }
    write_json(os.path.join(out_dir, "diagnostics.json"), diag)
    if timing:
        write_json(os.path.join(out_dir, "timing.json"), {"total_seconds": elapsed, "by_update": timings})
    return samples, meta


def fit_file(data_path, config: RunConfig, out_dir, *, timing=False):
    standardize = True if config.preprocess.standardize_y is None else config.preprocess.standardize_y
    data, _, future = load_dataset(data_path, config, standardize_y=standardize)
    return fit(data, config, out_dir, derived_future=future, timing=timing)


# --------------------------------------------------------------- predict


def grid_from_meta(meta, config: RunConfig):
    g = config.grid
    if g.lower is not None and g.upper is not None:
        if not g.upper > g.lower:
            raise ConfigError("grid upper must exceed grid lower")
        return uniform_grid(g.lower, g.upper, g.n_points)
    s = meta["y_summary"]
    lo = s["min"] - g.pad_sd * s["sd"]
    hi = s["max"] + g.pad_sd * s["sd"]
    pts = meta["y_mean"] + meta["y_sd"] * np.linspace(lo, hi, g.n_points)
    if g.lower is not None:
        pts = np.linspace(g.lower, pts[-1], g.n_points)
    if g.upper is not None:
        pts = np.linspace(pts[0], g.upper, g.n_points)
    return DensityGrid(pts)


def resolve_future_x(meta, n, future_x_path=None):
    """Future covariates in raw predictor units, shape (n, p)."""
    if future_x_path is not None:
        _, X, _ = read_table(future_x_path, require_y=False)
        if X.shape[1] != meta["p"]:
            raise DataError(f"{future_x_path}: expected {meta['p']} covariate columns, got {X.shape[1]}")
    elif meta.get("derived_future_x") is not None:
        X = np.asarray(meta["derived_future_x"], dtype=float)
    else:
        raise DataError("missing future covariates for horizon 1: pass a future-x file")
    if X.shape[0] < n:
        raise DataError(f"missing future covariates for horizon {X.shape[0] + 1}")
    return X[:n]


def predict(fit_dir, out_dir, config: RunConfig, *, future_x_path=None, n=None):
    """Write density_h{n}.csv for each horizon; returns the DensityGrid list."""
    meta = read_json(os.path.join(fit_dir, "fit_meta.json"))
    samples = read_samples(os.path.join(fit_dir, "samples.jsonl"))
    if not samples:
        raise DataError(f"{fit_dir} holds no posterior samples")
    n = config.horizons if n is None else n
    X = resolve_future_x(meta, n, future_x_path)
    x_std = (X - np.asarray(meta["x_mean"])) / np.asarray(meta["x_sd"])
    grid = grid_from_meta(meta, config).with_values(None, model=meta["model"], seed=meta["seed"])
    dens = predictive_densities(samples, x_std, grid, n, meta["y_mean"], meta["y_sd"])
    os.makedirs(out_dir, exist_ok=True)
    for h, d in enumerate(dens, start=1):
        atomic_write_text(os.path.join(out_dir, f"density_h{h}.csv"), d.to_csv())
    return dens


# -------------------------------------------------------------- simulate


def _rep_name(b):
    return f"rep_{b:03d}"


def simulate(config: RunConfig, out_dir):
    """Write B replicate datasets with their truth records and a manifest."""
    sim = config.simulate
    if sim.design not in DESIGNS:
        raise ConfigError(f"unknown design {sim.design!r}; choose from {sorted(DESIGNS)}")
    try:
        design = DESIGNS[sim.design](T=sim.T, n_ahead=sim.n_ahead, **sim.overrides)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid design settings: {exc}") from exc
    reps = []
    for b in range(sim.B):
        seed = sim.seed + b
        _, _, truth = simulate_nhmm(design, np.random.default_rng(seed))
        d = os.path.join(out_dir, _rep_name(b))
        T = truth.T
        t = np.arange(1, T + truth.n_ahead + 1)
        write_table(os.path.join(d, "data.csv"), t[:T], truth.x[:T], truth.y[:T])
        write_table(os.path.join(d, "future_x.csv"), t[T:], truth.x[T:])
        write_json(os.path.join(d, "truth.json"), truth.to_dict())
        reps.append({"name": _rep_name(b), "seed": seed})
    manifest = {"design": sim.design, "master_seed": sim.seed, "B": sim.B, "T": sim.T, "n_ahead": sim.n_ahead,
                "replicates": reps}
    write_json(os.path.join(out_dir, "manifest.json"), manifest)
    return manifest


# -------------------------------------------------------------- evaluate


def _percentile(a, q):
    # type-7 (linear interpolation) sample percentile
    return float(np.percentile(a, q, method="linear"))


def evaluate(estimates_dir, truth_dir, out_dir=None):
    """ISE of every estimated density against its truth; returns summary rows.

    Layout: ``estimates_dir/<model>/<rep>/density_h<n>.csv`` and
    ``truth_dir/<rep>/truth.json``. Every model must cover every replicate and
    horizon present in its own directory tree.
    """
    reps = sorted(d for d in os.listdir(truth_dir) if os.path.isfile(os.path.join(truth_dir, d, "truth.json")))
    if not reps:
        raise DataError(f"no truth.json files under {truth_dir}")
    models = sorted(d for d in os.listdir(estimates_dir) if os.path.isdir(os.path.join(estimates_dir, d)))
    if not models:
        raise DataError(f"no model directories under {estimates_dir}")
    ise_rows = []
    for model in models:
        horizons = None
        for rep in reps:
            rdir = os.path.join(estimates_dir, model, rep)
            if not os.path.isdir(rdir):
                raise DataError(f"missing estimates for model {model!r}, replicate {rep!r}")
            hs = sorted(int(f[len("density_h") : -4]) for f in os.listdir(rdir)
                        if f.startswith("density_h") and f.endswith(".csv"))
            if horizons is None:
                horizons = hs
            if hs != horizons or not hs:
                raise DataError(f"model {model!r}, replicate {rep!r}: horizons {hs} do not match {horizons}")
            truth_path = os.path.join(truth_dir, rep, "truth.json")
            try:
                truth = Truth.from_dict(read_json(truth_path))
            except (KeyError, TypeError, ValueError) as exc:
                raise DataError(f"{truth_path}: malformed truth record ({exc!r})") from exc
            ests = []
            for h in hs:
                with open(os.path.join(rdir, f"density_h{h}.csv"), encoding="utf-8") as fh:
                    ests.append(DensityGrid.from_csv(fh.read()))
            if max(hs) > truth.n_ahead:
                raise DataError(f"replicate {rep!r} has truth for {truth.n_ahead} horizons only")
            for h, est in zip(hs, ests):
                true = true_predictive_densities(truth, est, h)[h - 1]
                diff = true.values[1:] - est.values[1:]
                ise_rows.append((model, rep, h, float(np.sum(diff * diff * est.deltas))))
    summary = []
    for model in models:
        for h in sorted({r[2] for r in ise_rows if r[0] == model}):
            vals = np.array([r[3] for r in ise_rows if r[0] == model and r[2] == h])
            summary.append({"model": model, "horizon": h, "n_reps": int(vals.size), "p25": _percentile(vals, 25),
                            "p50": _percentile(vals, 50), "mise_est": float(vals.mean())})
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        lines = ["model,horizon,n_reps,p25,p50,mise_est"]
        lines += [f"{r['model']},{r['horizon']},{r['n_reps']},{r['p25']!r},{r['p50']!r},{r['mise_est']!r}"
                  for r in summary]
        atomic_write_text(os.path.join(out_dir, "mise.csv"), "\n".join(lines) + "\n")
        ise = ["model,replicate,horizon,ise"] + [f"{m},{r},{h},{v!r}" for m, r, h, v in ise_rows]
        atomic_write_text(os.path.join(out_dir, "ise.csv"), "\n".join(ise) + "\n")
        atomic_write_text(os.path.join(out_dir, "mise.txt"), format_table(summary))
    return summary


def format_table(summary):
    head = f"{'model':<8} {'horizon':>7} {'n_reps':>6} {'p25':>12} {'p50':>12} {'mise_est':>12}"
    rows = [head, "-" * len(head)]
    for r in summary:
        rows.append(f"{r['model']:<8} {r['horizon']:>7d} {r['n_reps']:>6d} {r['p25']:>12.6f} {r['p50']:>12.6f} "
                    f"{r['mise_est']:>12.6f}")
    return "\n".join(rows) + "\n"


# -------------------------------------------------------------- replicate


def default_workers():
    raw = os.environ.get(WORKERS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return os.cpu_count() or 1


def _fit_and_predict(task):
    config_dict, model, rep_dir, est_dir, seed, standardize = task
    config = config_from_dict(config_dict)
    config = replace(config, model=model, mcmc=replace(config.mcmc, seed=seed))
    data, _, _ = load_dataset(os.path.join(rep_dir, "data.csv"), config, standardize_y=standardize)
    fit_dir = os.path.join(est_dir, "fit")
    fit(data, config, fit_dir)
    predict(fit_dir, est_dir, config, future_x_path=os.path.join(rep_dir, "future_x.csv"))
    os.remove(os.path.join(fit_dir, "samples.jsonl"))
    return model, os.path.basename(rep_dir)


def replicate(config: RunConfig, out_dir, workers=None):
    """Simulate B replicates, fit every model to each, predict, and evaluate."""
    workers = default_workers() if workers is None else workers
    models = config.models or [config.model]
    sim_dir = os.path.join(out_dir, "data")
    manifest = simulate(config, sim_dir)
    standardize = config.preprocess.standardize_y
    if standardize is None:
        standardize = config.simulate.design == "design2"
    cfg = config.to_dict()
    tasks = []
    for b, rep in enumerate(manifest["replicates"]):
        for model in models:
            tasks.append((cfg, model, os.path.join(sim_dir, rep["name"]),
                          os.path.join(out_dir, "estimates", model, rep["name"]), config.mcmc.seed + b, standardize))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for model, rep in pool.map(_fit_and_predict, tasks):
                log.info("finished %s %s", model, rep)
    else:
        for task in tasks:
            model, rep = _fit_and_predict(task)
            log.info("finished %s %s", model, rep)
    summary = evaluate(os.path.join(out_dir, "estimates"), sim_dir, os.path.join(out_dir, "report"))
    write_json(os.path.join(out_dir, "study.json"), {"manifest": manifest, "models": models, "summary": summary})
    return summary
