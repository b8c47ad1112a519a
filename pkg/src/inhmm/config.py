"""Run configuration: one JSON document with a section per concern."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace

from .distributions import NIGParams
from .model import VARIANTS, DEFAULT_GRID_PERCENTILES, Dataset, ModelSpec, RegressionPrior, SliceSequence, default_hyperpriors
from .sampler import McmcConfig


class ConfigError(ValueError):
    pass


@dataclass
class GridConfig:
    n_points: int = 512
    pad_sd: float = 3.0
    lower: float | None = None
    upper: float | None = None


@dataclass
class PreprocessConfig:
    accumulate_window: int = 0
    forward_lag: int = 0
    period: int = 12
    start_index: int = 0
    standardize_y: bool | None = None  # None: standardize, except design1 replicates
    t_min: float | None = None
    t_max: float | None = None


@dataclass
class SimulateConfig:
    design: str = "design1"
    T: int = 250
    B: int = 20
    seed: int = 20240101
    n_ahead: int = 3
    overrides: dict = field(default_factory=dict)


@dataclass
class HyperConfig:
    mu_alpha: float = 2.0
    sigma_alpha: float = 1.0
    mu_beta: float = 2.0
    sigma_beta: float = 2.0 / 3.0
    mu0: float = 0.0
    nu0: float = 0.1
    sigma2_mean: float = 0.2
    sigma2_sd: float = 1.0
    gamma0: float | None = None
    s0sq: float | None = None
    eta0: list | None = None
    eta_scale: float = 1.0
    grid_percentiles: list = field(default_factory=lambda: list(DEFAULT_GRID_PERCENTILES))


@dataclass
class RunConfig:
    model: str = "inhmm1"
    models: list = field(default_factory=list)
    mcmc: McmcConfig = field(default_factory=McmcConfig)
    hyper: HyperConfig = field(default_factory=HyperConfig)
    per_state_var: bool = False
    slice_kappa: float = 0.5
    grid: GridConfig = field(default_factory=GridConfig)
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    simulate: SimulateConfig = field(default_factory=SimulateConfig)
    horizons: int = 3

    def __post_init__(self):
        if self.model not in VARIANTS:
            raise ConfigError(f"model must be one of {VARIANTS}, got {self.model!r}")
        for m in self.models:
            if m not in VARIANTS:
                raise ConfigError(f"unknown model {m!r} in models")
        if not 0 < self.slice_kappa < 1:
            raise ConfigError("slice_kappa must lie in (0, 1)")
        if self.preprocess.accumulate_window < 0 or self.preprocess.forward_lag < 0:
            raise ConfigError("preprocess windows must be non-negative")
        if self.horizons < 1:
            raise ConfigError("horizons must be positive")
        if self.grid.n_points < 2:
            raise ConfigError("grid needs at least two points")

    def with_model(self, model):
        return replace(self, model=model)

    def to_dict(self):
        return asdict(self)


_SECTIONS = {
    "mcmc": McmcConfig,
    "hyper": HyperConfig,
    "grid": GridConfig,
    "preprocess": PreprocessConfig,
    "simulate": SimulateConfig,
}


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"section {where!r} must be an object")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys in {where!r}: {sorted(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {where!r} section: {exc}") from exc


def config_from_dict(d) -> RunConfig:
    d = dict(d)
    kwargs = {}
    for name, cls in _SECTIONS.items():
        if name in d:
            kwargs[name] = _build(cls, d.pop(name), name)
    top = {f.name for f in fields(RunConfig)} - set(_SECTIONS)
    unknown = set(d) - top
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    kwargs.update(d)
    try:
        return RunConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(raw)


def build_model_spec(config: RunConfig, data: Dataset, variant=None) -> ModelSpec:
    """Hyperpriors from the config, with data-dependent defaults filled in."""
    variant = variant or config.model
    h = config.hyper
    try:
        hyper = default_hyperpriors(
            data, variant, sigma2_mean=h.sigma2_mean, sigma2_sd=h.sigma2_sd, mu0=h.mu0, nu0=h.nu0,
            grid_percentiles=h.grid_percentiles, mu_alpha=h.mu_alpha, sigma_alpha=h.sigma_alpha,
            mu_beta=h.mu_beta, sigma_beta=h.sigma_beta,
        )
        em = hyper.emission
        gamma0 = h.gamma0 if h.gamma0 is not None else em.gamma0
        s0sq = h.s0sq if h.s0sq is not None else em.s0sq
        if isinstance(em, NIGParams):
            emission = NIGParams(em.mu0, em.nu0, gamma0, s0sq)
        else:
            eta0 = tuple(h.eta0) if h.eta0 is not None else em.eta0
            if len(eta0) != data.p + 1:
                raise ConfigError(f"eta0 must have {data.p + 1} entries")
            emission = RegressionPrior(eta0, h.eta_scale, gamma0, s0sq)
        hyper = replace(hyper, emission=emission)
        return ModelSpec(variant, hyper, SliceSequence(config.slice_kappa), config.per_state_var)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid hyperparameters: {exc}") from exc
