"""Run configuration: a TOML file plus command-line overrides.

Example::

    problem = "I"
    seed = 7
    level = 0.9

    [synthesis]          # used when [data] has no path
    lam = 0.98
    theta0 = 5.0
    theta_air = 20.0
    sigma = 0.16
    n_obs = 20

    [priors.lam]         # replaces the default prior of one unknown
    family = "truncated_normal"
    mu = 1.0
    sigma = 0.3
    lo = 0.0

    [chains]
    n_chains = 4
    n_steps = 50000
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, fields, replace

from .probability import DistributionSpec, distribution_from_dict
from .sampler import ChainConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

PROBLEMS = ("I", "IIa", "IIb", "sweep")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DataSource:
    path: str | None = None
    format: str = "temperature_celsius"
    time_unit: str = "hours"
    theta0_obs: float | None = None
    theta_air_obs: float | None = None
    t_prime: float | None = None
    theta_prime_obs: float | None = None


@dataclass(frozen=True)
class SynthesisSpec:
    lam: float = 0.98
    t0: float = 0.0
    theta0: float = 5.0
    theta_air: float = 20.0
    sigma: float = 0.16
    n_obs: int = 20
    t_end: float | None = None  # defaults to t0 + 4 lam
    t_prime: float = 1.0  # reading time for IIa/IIb

    def __post_init__(self):
        if not (self.lam > 0 and self.sigma > 0 and self.n_obs >= 1):
            raise ConfigError("synthesis needs lam > 0, sigma > 0, n_obs >= 1")


@dataclass(frozen=True)
class AnalysisSpec:
    n_trajectories: int = 100
    kde_points: int = 512
    bandwidth: float | None = None
    joint_bins: int = 80
    time_points: int = 200
    svg: bool = False


@dataclass(frozen=True)
class SweepSpec:
    t_prime_factors: tuple[float, ...] = (0.5, 1.0, 2.0, 3.0, 4.0)


@dataclass(frozen=True)
class RunConfig:
    problem: str = "I"
    seed: int = 0
    level: float = 0.9
    out: str = "out"
    workers: int = 1
    sigma_meas: float = 0.5
    data: DataSource = field(default_factory=DataSource)
    synthesis: SynthesisSpec = field(default_factory=SynthesisSpec)
    priors: dict = field(default_factory=dict)  # name -> DistributionSpec
    chains: ChainConfig = field(default_factory=ChainConfig)
    analysis: AnalysisSpec = field(default_factory=AnalysisSpec)
    sweep: SweepSpec = field(default_factory=SweepSpec)

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ConfigError(f"problem must be one of {PROBLEMS}, got {self.problem!r}")
        if not 0.0 < self.level <= 1.0:
            raise ConfigError(f"level must lie in (0, 1], got {self.level}")
        if not self.sigma_meas > 0:
            raise ConfigError("sigma_meas must be positive")


def _build(cls, table: dict, section: str):
    if not isinstance(table, dict):
        raise ConfigError(f"[{section}] must be a table")
    known = {f.name for f in fields(cls)}
    unknown = set(table) - known
    if unknown:
        raise ConfigError(f"[{section}] unknown keys {sorted(unknown)}; allowed {sorted(known)}")
    try:
        return cls(**table)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {exc}") from None


def config_from_dict(raw: dict) -> RunConfig:
    raw = dict(raw)
    kwargs = {}
    for key in ("problem", "seed", "level", "out", "workers", "sigma_meas"):
        if key in raw:
            kwargs[key] = raw.pop(key)
    if "data" in raw:
        kwargs["data"] = _build(DataSource, raw.pop("data"), "data")
    if "synthesis" in raw:
        kwargs["synthesis"] = _build(SynthesisSpec, raw.pop("synthesis"), "synthesis")
    if "analysis" in raw:
        kwargs["analysis"] = _build(AnalysisSpec, raw.pop("analysis"), "analysis")
    if "sweep" in raw:
        sw = dict(raw.pop("sweep"))
        if "t_prime_factors" in sw:
            sw["t_prime_factors"] = tuple(float(v) for v in sw["t_prime_factors"])
        kwargs["sweep"] = _build(SweepSpec, sw, "sweep")
    if "priors" in raw:
        priors: dict[str, DistributionSpec] = {}
        for name, table in raw.pop("priors").items():
            try:
                priors[name] = distribution_from_dict(table)
            except ValueError as exc:
                raise ConfigError(f"[priors.{name}] {exc}") from None
        kwargs["priors"] = priors
    chains = dict(raw.pop("chains", {}))
    if "initial_step_scales" in chains:
        chains["initial_step_scales"] = tuple(chains["initial_step_scales"])
    if raw:
        raise ConfigError(f"unknown top-level keys {sorted(raw)}")
    try:
        cfg = RunConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return replace(cfg, chains=_build(ChainConfig, {"seed": cfg.seed, **chains}, "chains"))


def load_config(path=None, **overrides) -> RunConfig:
    """Read ``path`` (TOML) if given and apply non-None ``overrides``
    (``problem``, ``seed``, ``out``, ``level``, ``data``)."""
    raw: dict = {}
    if path is not None:
        try:
            with open(path, "rb") as f:
                raw = tomllib.load(f)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    data_path = overrides.pop("data", None)
    if data_path is not None:
        raw.setdefault("data", {})["path"] = data_path
    for k, v in overrides.items():
        if v is not None:
            raw[k] = v
    if "seed" in overrides and overrides["seed"] is not None:
        raw.setdefault("chains", {}).pop("seed", None)
    return config_from_dict(raw)


def config_to_dict(cfg: RunConfig) -> dict:
    """Plain-data view of a config for embedding in reports."""

    def clean(v):
        if isinstance(v, float) and not math.isfinite(v):
            return repr(v)
        if isinstance(v, tuple):
            return [clean(x) for x in v]
        return v

    out = {k: clean(getattr(cfg, k)) for k in ("problem", "seed", "level", "workers", "sigma_meas")}
    for sect in ("data", "synthesis", "analysis", "sweep", "chains"):
        obj = getattr(cfg, sect)
        out[sect] = {f.name: clean(getattr(obj, f.name)) for f in fields(obj)}
    out["priors"] = {k: {kk: clean(vv) for kk, vv in d.to_dict().items()} for k, d in cfg.priors.items()}
    return out
