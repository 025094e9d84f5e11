"""Lumped-capacitance (Newton cooling) model of a lime warming in air.

All times are in hours, temperatures in degrees Celsius.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TEMP_WINDOW = (-50.0, 100.0)


class ModelInputError(ValueError):
    pass


def _check_finite(**values):
    for name, v in values.items():
        if not np.all(np.isfinite(v)):
            raise ModelInputError(f"{name} must be finite, got {v!r}")


@dataclass(frozen=True)
class ExperimentConditions:
    t0: float
    theta0: float
    theta_air: float
    window: tuple[float, float] = field(default=TEMP_WINDOW, compare=False, repr=False)

    def __post_init__(self):
        _check_finite(t0=self.t0, theta0=self.theta0, theta_air=self.theta_air)
        lo, hi = self.window
        for name in ("theta0", "theta_air"):
            v = getattr(self, name)
            if not lo <= v <= hi:
                raise ModelInputError(f"{name}={v} outside sanity window [{lo}, {hi}] degC")


@dataclass(frozen=True)
class ModelParams:
    lam: float

    def __post_init__(self):
        _check_finite(lam=self.lam)
        if self.lam <= 0:
            raise ModelInputError(f"time constant must be positive, got {self.lam}")


@dataclass(frozen=True)
class PhysicalEstimateInputs:
    """Lime properties for a back-of-the-envelope time constant.

    Units: mass [kg], specific_heat [kJ/(kg degC)], h_coeff [W/(m^2 degC)],
    radius [m], thermal_conductivity [W/(m degC)].
    """

    mass: float
    specific_heat: float
    h_coeff: float
    radius: float
    thermal_conductivity: float = 0.595

    def __post_init__(self):
        for name in ("mass", "specific_heat", "h_coeff", "radius", "thermal_conductivity"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ModelInputError(f"{name} must be strictly positive, got {v}")


def _theta(t, lam, t0, theta0, theta_air):
    # unchecked closed form; hot path for likelihood evaluation
    return theta_air + (theta0 - theta_air) * np.exp(-(t - t0) / lam)


def lime_temperature(t, params: ModelParams, cond: ExperimentConditions):
    """Closed-form lime temperature at time(s) ``t``.

    Defined for any finite ``t``, including ``t < t0`` (backward extrapolation);
    physical validity is the caller's concern. Returns a float for scalar ``t``
    and an array otherwise.
    """
    _check_finite(t=t)
    out = _theta(np.asarray(t, dtype=float), params.lam, cond.t0, cond.theta0, cond.theta_air)
    return float(out) if np.ndim(out) == 0 else out


def integrate_ode(params: ModelParams, cond: ExperimentConditions, t_end: float, dt: float):
    """Fixed-step RK4 integration of ``lam * dtheta/dt = theta_air - theta``.

    Returns ``(times, temperatures)`` arrays. The final step is shortened if
    ``t_end - t0`` is not a multiple of ``dt``.
    """
    _check_finite(t_end=t_end, dt=dt)
    if dt <= 0:
        raise ModelInputError(f"dt must be positive, got {dt}")
    if t_end < cond.t0:
        raise ModelInputError(f"t_end={t_end} precedes t0={cond.t0}")

    lam, air = params.lam, cond.theta_air

    def rhs(y):
        return (air - y) / lam

    span = t_end - cond.t0
    n_full = int(math.floor(span / dt + 1e-9))
    steps = [dt] * n_full
    rem = span - n_full * dt
    if rem > 1e-12 * max(1.0, span):
        steps.append(rem)

    times = np.empty(len(steps) + 1)
    temps = np.empty(len(steps) + 1)
    t, y = cond.t0, cond.theta0
    times[0], temps[0] = t, y
    for i, h in enumerate(steps, start=1):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * h * k1)
        k3 = rhs(y + 0.5 * h * k2)
        k4 = rhs(y + h * k3)
        y = y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = cond.t0 + (i * dt if i <= n_full else span)
        times[i], temps[i] = t, y
    return times, temps


def error_amplification(t_prime, t0, lam):
    """Factor by which an error in the temperature read at ``t_prime`` is
    inflated in the reconstructed initial temperature."""
    _check_finite(t_prime=t_prime, t0=t0, lam=lam)
    if lam <= 0:
        raise ModelInputError(f"time constant must be positive, got {lam}")
    return math.exp((t_prime - t0) / lam)


def estimate_lambda(inputs: PhysicalEstimateInputs) -> float:
    """Time constant C/(hA) in hours for a spherical lime."""
    heat_capacity = inputs.mass * inputs.specific_heat * 1e3  # J/degC
    area = 4.0 * math.pi * inputs.radius**2
    return heat_capacity / (inputs.h_coeff * area) / 3600.0


def biot_number(h_coeff, radius, thermal_conductivity):
    if h_coeff <= 0 or thermal_conductivity <= 0 or radius < 0:
        raise ModelInputError("h_coeff and thermal_conductivity must be positive, radius non-negative")
    return h_coeff * radius / thermal_conductivity


def classical_solution_curve(t_prime, theta_prime, theta_air, lam, t0_grid):
    """Initial conditions ``(t0, theta0)`` whose trajectories pass exactly
    through ``(t_prime, theta_prime)``.

    Returns an array of shape ``(len(t0_grid), 2)``.
    """
    t0_grid = np.atleast_1d(np.asarray(t0_grid, dtype=float))
    _check_finite(t_prime=t_prime, theta_prime=theta_prime, theta_air=theta_air, lam=lam, t0_grid=t0_grid)
    if lam <= 0:
        raise ModelInputError(f"time constant must be positive, got {lam}")
    bad = np.flatnonzero(t0_grid >= t_prime)
    if bad.size:
        raise ModelInputError(f"t0 must precede t_prime={t_prime}; offending entries at {bad.tolist()}")
    theta0 = theta_air + (theta_prime - theta_air) * np.exp((t_prime - t0_grid) / lam)
    return np.column_stack([t0_grid, theta0])


def reconstruct_initial_temperature(t_prime, theta_prime, theta_air, lam, t0=0.0) -> float:
    """Deterministic backward solve for a known ``t0``."""
    return float(classical_solution_curve(t_prime, theta_prime, theta_air, lam, [t0])[0, 1])
