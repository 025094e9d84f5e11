"""The three lime inverse problems, synthetic data, and the t' sweep.

Parameter names used throughout: ``lam`` (time constant, hr), ``t0`` (hr),
``theta0``, ``theta_air``, ``sigma`` (degC).
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import analysis
from .forward_model import ExperimentConditions, ModelInputError, _theta
from .probability import LOG_SQRT_2PI, DistributionSpec, Normal, Observation, TruncatedNormal, Uniform
from .sampler import ChainConfig, SampleSet, rw_metropolis, split_rhat

BOUND_NAMES = ("lam", "t0", "theta0", "theta_air", "sigma")

# default priors for the three problems
LAMBDA_PRIOR = (1.0, 0.3)  # hr, truncated below zero
SIGMA_PRIOR_HI = 1.0  # degC
SIGMA_MEAS = 0.5  # degC, fixed width of the theta0/theta_air measurement priors
LAMBDA_SUMMARY = (0.98, 0.02)  # hr
SIGMA_SUMMARY = (0.16, 0.03)  # degC
THETA0_RANGE = (0.0, 15.0)  # degC, refrigerator temperatures
T0_PRIOR = TruncatedNormal(-0.1, 0.25, -1.0, 1.0)  # hr


class ProblemError(ValueError):
    pass


@dataclass(frozen=True)
class ProblemSpec:
    """Unknowns with priors, fixed constants and data, bound to the forward model.

    ``strict_elapsed`` requires every observation to come strictly after
    ``t0`` (used when ``t0`` is itself unknown).
    """

    name: str
    unknowns: tuple[tuple[str, DistributionSpec], ...]
    fixed: dict = field(default_factory=dict)
    data: tuple[Observation, ...] = ()
    strict_elapsed: bool = False

    def __post_init__(self):
        object.__setattr__(self, "unknowns", tuple((str(n), d) for n, d in self.unknowns))
        object.__setattr__(self, "data", tuple(self.data))
        object.__setattr__(self, "fixed", {k: float(v) for k, v in self.fixed.items()})
        names = [n for n, _ in self.unknowns]
        seen = names + list(self.fixed)
        for b in BOUND_NAMES:
            if seen.count(b) != 1:
                raise ProblemError(f"{self.name}: {b!r} must be bound exactly once (unknown or fixed), found {seen.count(b)}")
        extra = set(seen) - set(BOUND_NAMES)
        if extra:
            raise ProblemError(f"{self.name}: unrecognised names {sorted(extra)}")
        if "t0" in self.fixed:
            late = [o.t for o in self.data if o.t < self.fixed["t0"]]
            if late:
                raise ProblemError(f"{self.name}: observations precede fixed t0: {late}")
        # precomputed lookups for the sampling hot path
        slots = []
        for b in BOUND_NAMES:
            slots.append(names.index(b) if b in names else None)
        object.__setattr__(self, "_slots", tuple(slots))
        object.__setattr__(self, "_priors", tuple(d for _, d in self.unknowns))
        object.__setattr__(self, "_t", np.array([o.t for o in self.data]))
        object.__setattr__(self, "_y", np.array([o.theta_obs for o in self.data]))

    @property
    def param_names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.unknowns)

    def prior(self, name: str) -> DistributionSpec:
        return dict(self.unknowns)[name]

    def bind(self, u) -> dict:
        """Map a parameter vector to all five forward-model quantities."""
        return {b: (u[s] if s is not None else self.fixed[b]) for b, s in zip(BOUND_NAMES, self._slots)}

    def log_prior(self, u) -> float:
        total = 0.0
        for dist, x in zip(self._priors, u):
            lp = dist.logpdf(x)
            if lp == -math.inf:
                return -math.inf
            total += lp
        return total

    def log_likelihood(self, u) -> float:
        vals = [u[s] if s is not None else self.fixed[b] for b, s in zip(BOUND_NAMES, self._slots)]
        lam, t0, theta0, theta_air, sigma = vals
        if not (lam > 0 and sigma > 0):
            return -math.inf
        if self._t.size == 0:
            return 0.0
        if self.strict_elapsed:
            if self._t.min() <= t0:
                return -math.inf
        elif self._t.min() < t0:
            return -math.inf
        r = (self._y - _theta(self._t, lam, t0, theta0, theta_air)) / sigma
        return float(-0.5 * np.dot(r, r) - r.size * (math.log(sigma) + LOG_SQRT_2PI))

    def log_posterior(self, u) -> float:
        lp = self.log_prior(u)
        if lp == -math.inf:
            return lp
        return lp + self.log_likelihood(u)

    __call__ = log_posterior

    def sample_prior(self, rng: np.random.Generator) -> np.ndarray:
        return np.array([d.sample(rng) for d in self._priors])

    def with_data(self, data) -> "ProblemSpec":
        return replace(self, data=tuple(data))


@dataclass(frozen=True)
class GroundTruth:
    """Generating values for synthetic experiments. Never passed to a problem builder."""

    lam: float
    cond: ExperimentConditions
    sigma: float
    seed: int = 0

    def __post_init__(self):
        if not self.lam > 0:
            raise ModelInputError("lam must be positive")
        if not self.sigma > 0:
            raise ModelInputError("sigma must be positive")

    def to_dict(self) -> dict:
        return {
            "lam": self.lam,
            "t0": self.cond.t0,
            "theta0": self.cond.theta0,
            "theta_air": self.cond.theta_air,
            "sigma": self.sigma,
            "seed": self.seed,
        }


def default_schedule(lam: float, n: int = 20, t0: float = 0.0) -> np.ndarray:
    """``n`` evenly spaced times over ``[t0, t0 + 4 lam]``."""
    return np.linspace(t0, t0 + 4.0 * lam, n)


def synthesize_data(truth: GroundTruth, schedule, rng: np.random.Generator) -> list[Observation]:
    schedule = np.asarray(schedule, dtype=float)
    if np.any(schedule < truth.cond.t0):
        raise ProblemError("observation times must not precede t0")
    c = truth.cond
    mean = _theta(schedule, truth.lam, c.t0, c.theta0, c.theta_air)
    noisy = mean + rng.normal(0.0, truth.sigma, size=schedule.size)
    return [Observation(float(t), float(y)) for t, y in zip(schedule, noisy)]


def measure(value: float, sigma: float, rng: np.random.Generator) -> float:
    """A single noisy reading of ``value``."""
    return float(value + rng.normal(0.0, sigma))


def build_problem_I(
    data,
    theta0_obs: float,
    theta_air_obs: float,
    sigma_prior_halfwidth: float = SIGMA_PRIOR_HI,
    lambda_prior: tuple[float, float] = LAMBDA_PRIOR,
    sigma_meas: float = SIGMA_MEAS,
    priors: dict | None = None,
) -> ProblemSpec:
    """Parameter identification: infer ``lam`` from a cooling-curve time series."""
    data = tuple(data)
    if not data:
        raise ProblemError("problem I needs at least one observation")
    unknowns = {
        "lam": TruncatedNormal(lambda_prior[0], lambda_prior[1], 0.0, math.inf),
        "theta0": Normal(theta0_obs, sigma_meas),
        "theta_air": Normal(theta_air_obs, sigma_meas),
        "sigma": Uniform(0.0, sigma_prior_halfwidth),
    }
    unknowns.update(priors or {})
    return ProblemSpec("I", tuple(unknowns.items()), {"t0": 0.0}, data)


def build_problem_IIa(
    theta_prime_obs: float,
    t_prime: float,
    theta_air_obs: float,
    lambda_summary: tuple[float, float] = LAMBDA_SUMMARY,
    sigma_summary: tuple[float, float] = SIGMA_SUMMARY,
    theta0_range: tuple[float, float] = THETA0_RANGE,
    sigma_meas: float = SIGMA_MEAS,
    priors: dict | None = None,
) -> ProblemSpec:
    """Time reversal with known ``t0 = 0``: infer ``theta0`` from one later reading."""
    if not t_prime > 0:
        raise ProblemError(f"t_prime must be positive, got {t_prime}")
    unknowns = {
        "theta0": Uniform(*theta0_range),
        "lam": Normal(*lambda_summary),
        "theta_air": Normal(theta_air_obs, sigma_meas),
        "sigma": TruncatedNormal(sigma_summary[0], sigma_summary[1], 0.0, math.inf),
    }
    unknowns.update(priors or {})
    return ProblemSpec("IIa", tuple(unknowns.items()), {"t0": 0.0}, (Observation(t_prime, theta_prime_obs),))


def build_problem_IIb(
    theta_prime_obs: float,
    t_prime: float,
    theta_air_obs: float,
    lambda_summary: tuple[float, float] = LAMBDA_SUMMARY,
    sigma_summary: tuple[float, float] = SIGMA_SUMMARY,
    t0_prior: DistributionSpec = T0_PRIOR,
    theta0_range: tuple[float, float] = THETA0_RANGE,
    sigma_meas: float = SIGMA_MEAS,
    priors: dict | None = None,
) -> ProblemSpec:
    """Time reversal with unknown ``t0``: infer ``(t0, theta0)`` from one reading."""
    unknowns = {
        "t0": t0_prior,
        "theta0": Uniform(*theta0_range),
        "lam": Normal(*lambda_summary),
        "theta_air": Normal(theta_air_obs, sigma_meas),
        "sigma": TruncatedNormal(sigma_summary[0], sigma_summary[1], 0.0, math.inf),
    }
    unknowns.update(priors or {})
    return ProblemSpec(
        "IIb", tuple(unknowns.items()), {}, (Observation(t_prime, theta_prime_obs),), strict_elapsed=True
    )


def initial_scales(problem: ProblemSpec, fraction: float = 0.1) -> tuple[float, ...]:
    """Starting proposal scales: a fraction of each prior's spread."""
    out = []
    for _, d in problem.unknowns:
        if isinstance(d, Uniform):
            s = (d.hi - d.lo) / math.sqrt(12.0)
        else:
            s = d.sigma
            if isinstance(d, TruncatedNormal) and math.isfinite(d.hi - d.lo):
                s = min(s, (d.hi - d.lo) / math.sqrt(12.0))
        out.append(fraction * s)
    return tuple(out)


def run_problem(problem: ProblemSpec, config: ChainConfig, workers: int = 1) -> SampleSet:
    """Sample the posterior; each chain starts at its own prior draw."""
    if config.initial_step_scales is None:
        config = replace(config, initial_step_scales=initial_scales(problem))
    return rw_metropolis(problem.log_posterior, problem.sample_prior, config, problem.param_names, workers=workers)


@dataclass(frozen=True)
class SweepPoint:
    t_prime: float
    theta_prime_obs: float
    theta0_mean: float
    theta0_std: float
    ci: tuple[float, float]
    max_rhat: float
    theta0_draws: np.ndarray = field(repr=False)


def _sweep_job(args):
    problem, config, t_prime, theta_prime, level = args
    samples = run_problem(problem, config)
    x = samples.column("theta0")
    mean, std = analysis.gaussian_summary(x)
    rhat = float(np.max(split_rhat(samples))) if samples.n_chains > 1 else math.nan
    return SweepPoint(t_prime, theta_prime, mean, std, analysis.equal_tailed_ci(x, level), rhat, x)


def ill_conditioning_sweep(
    truth: GroundTruth,
    t_prime_list,
    config: ChainConfig,
    level: float = 0.9,
    workers: int = 1,
    **problem_kwargs,
) -> list[SweepPoint]:
    """Problem IIa repeated at increasing measurement times.

    For each ``t'`` one reading of the lime and one of the air are synthesized
    from ``truth`` (seeded from ``truth.seed`` and the point index), then
    inverted for ``theta0``.
    """
    t_list = [float(t) for t in t_prime_list]
    if any(b <= a for a, b in zip(t_list, t_list[1:])):
        raise ProblemError("t_prime values must be strictly increasing")
    jobs = []
    for i, tp in enumerate(t_list):
        rng = np.random.default_rng([truth.seed, i])
        (obs,) = synthesize_data(truth, [tp], rng)
        air_obs = measure(truth.cond.theta_air, truth.sigma, rng)
        problem = build_problem_IIa(obs.theta_obs, tp, air_obs, **problem_kwargs)
        jobs.append((problem, replace(config, seed=(config.seed + 1000 * i) % 2**64), tp, obs.theta_obs, level))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(_sweep_job, jobs))
    return [_sweep_job(j) for j in jobs]
