"""Distribution primitives and likelihood/posterior assembly.

Everything is computed in log space. Densities are normalized, including the
truncated normal, so prior curves can be plotted next to posterior KDEs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import erfc

from .forward_model import ExperimentConditions, ModelParams, _theta

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_SQRT2 = math.sqrt(2.0)


class DistributionError(ValueError):
    pass


def _std_normal_mass(a: float, b: float) -> float:
    """P(a < Z < b) for a standard normal, computed on the tail that avoids cancellation."""
    if a > 0:
        return 0.5 * (math.erfc(a / _SQRT2) - math.erfc(b / _SQRT2))
    if b < 0:
        return 0.5 * (math.erfc(-b / _SQRT2) - math.erfc(-a / _SQRT2))
    return 1.0 - 0.5 * math.erfc(-a / _SQRT2) - 0.5 * math.erfc(b / _SQRT2)


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and self.lo < self.hi):
            raise DistributionError(f"Uniform needs finite lo < hi, got ({self.lo}, {self.hi})")
        object.__setattr__(self, "_logz", math.log(self.hi - self.lo))

    def logpdf(self, x: float) -> float:
        if self.lo <= x <= self.hi:
            return -self._logz
        return -math.inf

    def logpdf_array(self, x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= self.lo) & (x <= self.hi), -self._logz, -np.inf)

    def cdf(self, x):
        return np.clip((np.asarray(x, dtype=float) - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    def sample(self, rng: np.random.Generator, size=None):
        return rng.uniform(self.lo, self.hi, size=size)

    def support(self):
        return self.lo, self.hi

    def to_dict(self):
        return {"family": "uniform", "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class Normal:
    mu: float
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.sigma) and self.sigma > 0):
            raise DistributionError(f"Normal needs finite mu and sigma > 0, got ({self.mu}, {self.sigma})")
        object.__setattr__(self, "_logz", math.log(self.sigma) + LOG_SQRT_2PI)

    def logpdf(self, x: float) -> float:
        z = (x - self.mu) / self.sigma
        return -0.5 * z * z - self._logz

    def logpdf_array(self, x):
        z = (np.asarray(x, dtype=float) - self.mu) / self.sigma
        return -0.5 * z * z - self._logz

    def cdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mu) / self.sigma
        return 0.5 * erfc(-z / _SQRT2)

    def sample(self, rng: np.random.Generator, size=None):
        return rng.normal(self.mu, self.sigma, size=size)

    def support(self):
        return -math.inf, math.inf

    def to_dict(self):
        return {"family": "normal", "mu": self.mu, "sigma": self.sigma}


@dataclass(frozen=True)
class TruncatedNormal:
    """Normal(mu, sigma) restricted to [lo, hi]; either bound may be infinite."""

    mu: float
    sigma: float
    lo: float = -math.inf
    hi: float = math.inf

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.sigma) and self.sigma > 0):
            raise DistributionError(f"TruncatedNormal needs finite mu and sigma > 0, got ({self.mu}, {self.sigma})")
        if math.isnan(self.lo) or math.isnan(self.hi) or not self.lo < self.hi:
            raise DistributionError(f"TruncatedNormal needs lo < hi, got ({self.lo}, {self.hi})")
        a = (self.lo - self.mu) / self.sigma
        b = (self.hi - self.mu) / self.sigma
        mass = _std_normal_mass(a, b)
        if not mass > 0:
            raise DistributionError(f"truncation window [{self.lo}, {self.hi}] carries no probability mass")
        object.__setattr__(self, "_mass", mass)
        object.__setattr__(self, "_logz", math.log(self.sigma) + LOG_SQRT_2PI + math.log(mass))

    def logpdf(self, x: float) -> float:
        if not self.lo <= x <= self.hi:
            return -math.inf
        z = (x - self.mu) / self.sigma
        return -0.5 * z * z - self._logz

    def logpdf_array(self, x):
        x = np.asarray(x, dtype=float)
        z = (x - self.mu) / self.sigma
        return np.where((x >= self.lo) & (x <= self.hi), -0.5 * z * z - self._logz, -np.inf)

    def cdf(self, x):
        x = np.clip(np.asarray(x, dtype=float), self.lo, self.hi)
        a = (self.lo - self.mu) / self.sigma
        z = (x - self.mu) / self.sigma
        # same tail-aware difference as the normalizing mass
        if a > 0:
            num = 0.5 * (math.erfc(a / _SQRT2) - erfc(z / _SQRT2))
        else:
            num = 0.5 * (erfc(-z / _SQRT2) - math.erfc(-a / _SQRT2))
        return np.clip(num / self._mass, 0.0, 1.0)

    def sample(self, rng: np.random.Generator, size=None):
        # rejection from the parent normal, redrawing anything outside the window
        n = 1 if size is None else int(np.prod(size))
        out = np.empty(n)
        filled = 0
        while filled < n:
            need = n - filled
            batch = max(16, int(1.2 * need / self._mass) + 1)
            draws = rng.normal(self.mu, self.sigma, size=batch)
            keep = draws[(draws >= self.lo) & (draws <= self.hi)][:need]
            out[filled : filled + keep.size] = keep
            filled += keep.size
        if size is None:
            return float(out[0])
        return out.reshape(size)

    def support(self):
        return self.lo, self.hi

    def to_dict(self):
        return {"family": "truncated_normal", "mu": self.mu, "sigma": self.sigma, "lo": self.lo, "hi": self.hi}


DistributionSpec = Union[Uniform, Normal, TruncatedNormal]


def distribution_from_dict(d: dict) -> DistributionSpec:
    """Build a distribution from a config table such as
    ``{family = "truncated_normal", mu = 1.0, sigma = 0.3, lo = 0.0}``."""
    d = dict(d)
    family = str(d.pop("family", "")).lower().replace("-", "_")
    try:
        if family == "uniform":
            return Uniform(float(d.pop("lo")), float(d.pop("hi")))
        if family == "normal":
            return Normal(float(d.pop("mu")), float(d.pop("sigma")))
        if family in ("truncated_normal", "truncnorm"):
            return TruncatedNormal(
                float(d.pop("mu")),
                float(d.pop("sigma")),
                float(d.pop("lo", -math.inf)),
                float(d.pop("hi", math.inf)),
            )
    except KeyError as exc:
        raise DistributionError(f"{family} distribution is missing field {exc.args[0]!r}") from None
    raise DistributionError(f"unknown distribution family {family!r}")


def log_pdf(dist: DistributionSpec, x):
    if np.ndim(x) == 0:
        return dist.logpdf(float(x))
    return dist.logpdf_array(x)


def sample(dist: DistributionSpec, rng: np.random.Generator, size=None):
    return dist.sample(rng, size)


@dataclass(frozen=True)
class NoiseModel:
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise DistributionError(f"noise sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class Observation:
    t: float
    theta_obs: float

    def __post_init__(self):
        if not (math.isfinite(self.t) and math.isfinite(self.theta_obs)):
            raise ValueError(f"observation must be finite, got ({self.t}, {self.theta_obs})")


def _sigma_of(noise) -> float:
    return noise.sigma if isinstance(noise, NoiseModel) else float(noise)


def gaussian_loglik(residuals, sigma: float) -> float:
    """Sum of Gaussian log densities of ``residuals``; -inf for sigma <= 0."""
    if not sigma > 0:
        return -math.inf
    r = np.asarray(residuals, dtype=float) / sigma
    return float(-0.5 * np.dot(r, r) - r.size * (math.log(sigma) + LOG_SQRT_2PI))


def log_likelihood_point(obs: Observation, params: ModelParams, cond: ExperimentConditions, noise) -> float:
    pred = _theta(obs.t, params.lam, cond.t0, cond.theta0, cond.theta_air)
    return gaussian_loglik([obs.theta_obs - pred], _sigma_of(noise))


def log_likelihood_series(data, params: ModelParams, cond: ExperimentConditions, noise) -> float:
    if len(data) == 0:
        return 0.0
    t = np.array([o.t for o in data])
    y = np.array([o.theta_obs for o in data])
    return gaussian_loglik(y - _theta(t, params.lam, cond.t0, cond.theta0, cond.theta_air), _sigma_of(noise))


def log_posterior(problem, u) -> float:
    """Unnormalized log posterior of ``problem`` (a :class:`~limebsi.problems.ProblemSpec`)."""
    return problem.log_posterior(u)
