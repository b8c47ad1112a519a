"""Command-line entry point: ``inhmm {simulate,fit,predict,evaluate,replicate}``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace

from . import harness
from .config import ConfigError, RunConfig, load_config
from .files import DataError, write_json
from .sampler import NumericalDegeneracyError, SamplerError

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DEGENERATE = 4


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if getattr(args, "model", None):
        cfg = cfg.with_model(args.model)
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, mcmc=replace(cfg.mcmc, seed=args.seed))
    return cfg


def cmd_simulate(args):
    manifest = harness.simulate(_config(args), args.out)
    print(f"wrote {manifest['B']} replicates of {manifest['design']} to {args.out}")


def cmd_fit(args):
    cfg = _config(args)
    try:
        samples, _ = harness.fit_file(args.data, cfg, args.out, timing=args.timing)
    except SamplerError as exc:
        os.makedirs(args.out, exist_ok=True)
        write_json(os.path.join(args.out, "diagnostics.json"),
                   {"status": "failed", "error": str(exc), "iteration": exc.iteration, "state": exc.state_dump})
        raise
    print(f"retained {len(samples)} samples in {args.out}")


def cmd_predict(args):
    cfg = _config(args)
    dens = harness.predict(args.fit, args.out, cfg, future_x_path=args.future_x, n=args.horizons)
    for d in dens:
        print(f"horizon {d.meta['n']}: mass {d.mass():.6f}")


def cmd_evaluate(args):
    summary = harness.evaluate(args.estimates, args.truth, args.out)
    print(harness.format_table(summary), end="")


def cmd_replicate(args):
    cfg = _config(args)
    if args.models:
        cfg = replace(cfg, models=args.models)
    summary = harness.replicate(cfg, args.out, workers=args.workers)
    print(harness.format_table(summary), end="")


def build_parser():
    p = argparse.ArgumentParser(prog="inhmm", description="Bayesian nonparametric non-homogeneous HMMs.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="write simulated replicate datasets")
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit", help="run the sampler on a dataset CSV")
    f.add_argument("--data", required=True)
    f.add_argument("--config")
    f.add_argument("--model", choices=("inhmm1", "inhmm2", "ihmmp1", "ihmmp2"))
    f.add_argument("--seed", type=int)
    f.add_argument("--out", required=True)
    f.add_argument("--timing", action="store_true", help="also write per-update wall-clock timings")
    f.set_defaults(func=cmd_fit)

    r = sub.add_parser("predict", help="predictive densities from a fit directory")
    r.add_argument("--fit", required=True)
    r.add_argument("--config")
    r.add_argument("--future-x", dest="future_x")
    r.add_argument("--horizons", type=int)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_predict)

    e = sub.add_parser("evaluate", help="ISE of estimated densities against the truth")
    e.add_argument("--estimates", required=True)
    e.add_argument("--truth", required=True)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_evaluate)

    b = sub.add_parser("replicate", help="simulate, fit, predict and evaluate end to end")
    b.add_argument("--config")
    b.add_argument("--models", nargs="+", choices=("inhmm1", "inhmm2", "ihmmp1", "ihmmp2"))
    b.add_argument("--workers", type=int)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_replicate)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalDegeneracyError as exc:
        print(f"numerical degeneracy at sweep {exc.iteration}: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except SamplerError as exc:
        print(f"sampler failed at sweep {exc.iteration}: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
