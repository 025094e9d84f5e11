"""Turning draws into summaries: KDEs, credible intervals, trajectories, residuals."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .forward_model import _theta
from .sampler import SampleSet

FORWARD_ARGS = ("lam", "t0", "theta0", "theta_air")


class AnalysisError(ValueError):
    pass


def silverman_bandwidth(x) -> float:
    x = np.asarray(x, dtype=float)
    std = x.std(ddof=1)
    iqr = np.subtract(*np.percentile(x, [75, 25]))
    spread = min(std, iqr / 1.34) if iqr > 0 else std
    return 0.9 * spread * x.size ** (-0.2)


def kde_grid(x, n_points: int = 512, bandwidth: float | None = None, pad: float = 4.0):
    """Evenly spaced grid covering the draws plus ``pad`` bandwidths each side."""
    x = np.asarray(x, dtype=float)
    h = silverman_bandwidth(x) if bandwidth is None else bandwidth
    return np.linspace(x.min() - pad * h, x.max() + pad * h, n_points)


def kde(samples, grid, bandwidth: float | None = None) -> np.ndarray:
    """Gaussian KDE of 1-D ``samples`` evaluated on ``grid``.

    Bandwidth defaults to Silverman's rule ``0.9 min(std, IQR/1.34) n^(-1/5)``.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2 or not np.ptp(x) > 0:
        raise AnalysisError(
            "cannot smooth draws with zero variance; report the value directly instead of a density"
        )
    h = silverman_bandwidth(x) if bandwidth is None else float(bandwidth)
    if not h > 0:
        raise AnalysisError(f"bandwidth must be positive, got {h}")
    grid = np.asarray(grid, dtype=float)
    dens = np.zeros(grid.shape)
    norm = 1.0 / (x.size * h * math.sqrt(2.0 * math.pi))
    for start in range(0, x.size, 4096):
        z = (grid[..., None] - x[start : start + 4096]) / h
        dens += np.exp(-0.5 * z * z).sum(axis=-1)
    return dens * norm


def equal_tailed_ci(samples, level: float = 0.9) -> tuple[float, float]:
    if not 0.0 < level <= 1.0:
        raise AnalysisError(f"credible level must be in (0, 1], got {level}")
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 10:
        raise AnalysisError(f"need at least 10 draws for an interval, got {x.size}")
    tail = (1.0 - level) / 2.0
    lo, hi = np.quantile(x, [tail, 1.0 - tail], method="linear")
    return float(lo), float(hi)


def marginalize(samples: SampleSet, names) -> SampleSet:
    idx = [samples.index(n) for n in names]
    return SampleSet(
        param_names=tuple(names),
        draws=samples.draws[:, :, idx],
        acceptance_rate=samples.acceptance_rate,
        seed=samples.seed,
    )


def gaussian_summary(samples) -> tuple[float, float]:
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2:
        raise AnalysisError("need at least 2 draws")
    return float(x.mean()), float(x.std(ddof=1))


def pearson_correlation(x, y) -> float:
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size or x.size < 2:
        raise AnalysisError("need two equal-length series of at least 2 draws")
    xc, yc = x - x.mean(), y - y.mean()
    sxx, syy = np.dot(xc, xc), np.dot(yc, yc)
    if sxx == 0 or syy == 0:
        raise AnalysisError("correlation undefined for a constant series")
    return float(np.clip(np.dot(xc, yc) / math.sqrt(sxx * syy), -1.0, 1.0))


def _forward_columns(samples: SampleSet, fixed: dict | None):
    fixed = dict(fixed or {})
    cols = {}
    for name in FORWARD_ARGS:
        if name in samples.param_names:
            cols[name] = samples.column(name)
        elif name in fixed:
            cols[name] = np.full(samples.n_chains * samples.n_draws, float(fixed[name]))
        else:
            raise AnalysisError(f"parameter {name!r} is neither sampled nor fixed")
    return cols


@dataclass(frozen=True)
class TrajectoryEnsemble:
    times: np.ndarray
    curves: np.ndarray  # (n, len(times))
    draw_indices: np.ndarray  # into the chain-concatenated draws

    def mean_curve(self) -> np.ndarray:
        return self.curves.mean(axis=0)


def posterior_trajectories(samples: SampleSet, n: int, time_grid, fixed=None, rng=None) -> TrajectoryEnsemble:
    """Model curves for ``n`` draws picked uniformly without replacement."""
    total = samples.n_chains * samples.n_draws
    if n > total:
        raise AnalysisError(f"asked for {n} trajectories from only {total} draws")
    rng = np.random.default_rng(0) if rng is None else rng
    cols = _forward_columns(samples, fixed)
    idx = np.sort(rng.choice(total, size=n, replace=False))
    times = np.asarray(time_grid, dtype=float)
    curves = _theta(
        times[None, :],
        cols["lam"][idx, None],
        cols["t0"][idx, None],
        cols["theta0"][idx, None],
        cols["theta_air"][idx, None],
    )
    return TrajectoryEnsemble(times=times, curves=curves, draw_indices=idx)


def boxplot_stats(x) -> dict:
    """Tukey box-plot statistics (whiskers at the furthest draw within 1.5 IQR)."""
    x = np.asarray(x, dtype=float)
    q1, med, q3 = np.percentile(x, [25, 50, 75])
    iqr = q3 - q1
    lo_w = x[x >= q1 - 1.5 * iqr].min()
    hi_w = x[x <= q3 + 1.5 * iqr].max()
    return {
        "mean": float(x.mean()),
        "q1": float(q1),
        "median": float(med),
        "q3": float(q3),
        "whisker_lo": float(lo_w),
        "whisker_hi": float(hi_w),
    }


def residual_distributions(samples: SampleSet, data, fixed=None) -> np.ndarray:
    """(n_draws_total, n_obs) matrix of observed minus predicted temperature."""
    if len(data) == 0:
        raise AnalysisError("no observations")
    cols = _forward_columns(samples, fixed)
    t = np.array([o.t for o in data])
    y = np.array([o.theta_obs for o in data])
    pred = _theta(t[None, :], cols["lam"][:, None], cols["t0"][:, None], cols["theta0"][:, None], cols["theta_air"][:, None])
    return y[None, :] - pred


def residual_summary(samples: SampleSet, data, fixed=None) -> list[dict]:
    res = residual_distributions(samples, data, fixed)
    return [{"t": float(o.t), "theta_obs": float(o.theta_obs), **boxplot_stats(res[:, i])} for i, o in enumerate(data)]


def joint_density(x, y, bins: int = 80, x_range=None, y_range=None):
    """Grid-binned 2-D histogram smoothed by a Gaussian filter.

    The filter width per axis is the Silverman bandwidth in bin units. Returns
    bin centres and a density normalized to integrate to 1 over the grid.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x_range = x_range or (x.min(), x.max())
    y_range = y_range or (y.min(), y.max())
    hist, xe, ye = np.histogram2d(x, y, bins=bins, range=[x_range, y_range])
    dx, dy = xe[1] - xe[0], ye[1] - ye[0]
    sig = (silverman_bandwidth(x) / dx, silverman_bandwidth(y) / dy)
    smooth = gaussian_filter(hist, sigma=sig, mode="constant")
    smooth /= smooth.sum() * dx * dy
    return 0.5 * (xe[1:] + xe[:-1]), 0.5 * (ye[1:] + ye[:-1]), smooth


@dataclass(frozen=True)
class ParamSummary:
    mean: float
    std: float
    ci: tuple[float, float]
    grid: np.ndarray
    density: np.ndarray


@dataclass(frozen=True)
class PosteriorSummary:
    level: float
    params: dict  # name -> ParamSummary
    correlations: dict  # "a|b" -> rho

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "params": {
                k: {"mean": v.mean, "std": v.std, "ci_lower": v.ci[0], "ci_upper": v.ci[1]} for k, v in self.params.items()
            },
            "correlations": dict(self.correlations),
        }


def summarize(samples: SampleSet, level: float = 0.9, n_grid: int = 512, bandwidth=None) -> PosteriorSummary:
    params = {}
    for name in samples.param_names:
        x = samples.column(name)
        mean, std = gaussian_summary(x)
        if np.ptp(x) > 0:
            grid = kde_grid(x, n_grid, bandwidth)
            dens = kde(x, grid, bandwidth)
        else:
            grid, dens = np.array([x[0]]), np.array([math.inf])
        params[name] = ParamSummary(mean, std, equal_tailed_ci(x, level), grid, dens)
    corr = {}
    names = samples.param_names
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            a, b = samples.column(names[i]), samples.column(names[j])
            corr[f"{names[i]}|{names[j]}"] = pearson_correlation(a, b) if np.ptp(a) > 0 and np.ptp(b) > 0 else None
    return PosteriorSummary(level, params, corr)
