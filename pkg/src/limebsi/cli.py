"""Command-line entry point: ``limebsi {simulate,infer,sweep,convert,diagnose}``.

Exit codes: 0 success (and every R-hat < 1.05 where sampling is involved),
1 invalid input/config (nothing written), 2 usage error, 3 not converged
(outputs still written).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, replace

import numpy as np

from . import analysis, svg
from .config import ConfigError, RunConfig, config_to_dict, load_config
from .forward_model import ExperimentConditions, ModelInputError, classical_solution_curve
from .ingest import IngestError, convert_file, load_timeseries, write_timeseries
from .probability import DistributionError, Observation
from .problems import (
    GroundTruth,
    ProblemError,
    ProblemSpec,
    build_problem_I,
    build_problem_IIa,
    build_problem_IIb,
    default_schedule,
    ill_conditioning_sweep,
    measure,
    run_problem,
    synthesize_data,
)
from .sampler import SampleSet, converged, diagnostics

log = logging.getLogger("limebsi")

RHAT_OK = 1.05
EXIT_OK, EXIT_INVALID, EXIT_NOT_CONVERGED = 0, 1, 3
INPUT_ERRORS = (ConfigError, IngestError, ProblemError, DistributionError, ModelInputError, ValueError, OSError)


# ---------------------------------------------------------------- helpers


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_json(path, obj) -> None:
    with open(path, "w") as f:
        json.dump(_jsonable(obj), f, indent=2, sort_keys=True)
        f.write("\n")


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as f:
        rows = [r for r in csv.reader(f) if r and not r[0].startswith("#")]
    return rows[0], np.array([[float(v) for v in r] for r in rows[1:]])


# ---------------------------------------------------------------- resolution


@dataclass(frozen=True)
class Prepared:
    problem: ProblemSpec
    data: tuple[Observation, ...]
    measured: dict
    truth: GroundTruth | None = None


def _truth(cfg: RunConfig) -> GroundTruth:
    s = cfg.synthesis
    return GroundTruth(s.lam, ExperimentConditions(s.t0, s.theta0, s.theta_air), s.sigma, cfg.seed)


def synthesize(cfg: RunConfig):
    """Synthetic dataset and measured conditions for ``cfg.problem``."""
    truth = _truth(cfg)
    s = cfg.synthesis
    rng = np.random.default_rng(cfg.seed)
    if cfg.problem == "I":
        t_end = s.t_end if s.t_end is not None else s.t0 + 4.0 * s.lam
        schedule = np.linspace(s.t0, t_end, s.n_obs) if s.t_end is not None else default_schedule(s.lam, s.n_obs, s.t0)
        if t_end < s.t0:
            raise ConfigError("synthesis.t_end precedes t0")
        data = synthesize_data(truth, schedule, rng)
        measured = {"theta0_obs": measure(s.theta0, s.sigma, rng), "theta_air_obs": measure(s.theta_air, s.sigma, rng)}
    else:
        if not s.t_prime > s.t0:
            raise ConfigError("synthesis.t_prime must come after t0")
        data = synthesize_data(truth, [s.t_prime], rng)
        measured = {"theta_air_obs": measure(s.theta_air, s.sigma, rng)}
    return truth, data, measured


def _load_data(cfg: RunConfig):
    d = cfg.data
    measured: dict = {}
    path = d.path
    if os.path.isdir(path):
        cond_path = os.path.join(path, "conditions.json")
        if os.path.exists(cond_path):
            with open(cond_path) as f:
                measured.update(json.load(f))
        path = os.path.join(path, "data.csv")
    data = load_timeseries(path, d.format, d.time_unit)
    for key in ("theta0_obs", "theta_air_obs"):
        if getattr(d, key) is not None:
            measured[key] = getattr(d, key)
    return data, measured


def prepare(cfg: RunConfig) -> Prepared:
    """Resolve data and priors into a ProblemSpec; raises before anything is written."""
    truth = None
    if cfg.data.path is not None:
        data, measured = _load_data(cfg)
    elif cfg.data.t_prime is not None and cfg.data.theta_prime_obs is not None:
        data = [Observation(cfg.data.t_prime, cfg.data.theta_prime_obs)]
        measured = {k: getattr(cfg.data, k) for k in ("theta0_obs", "theta_air_obs") if getattr(cfg.data, k) is not None}
    else:
        truth, data, measured = synthesize(cfg)
    problem_name = "IIa" if cfg.problem == "sweep" else cfg.problem

    if "theta_air_obs" not in measured:
        raise ConfigError("measured air temperature missing: set data.theta_air_obs")
    if problem_name == "I":
        if "theta0_obs" not in measured:
            raise ConfigError("problem I needs data.theta0_obs (measured initial lime temperature)")
        problem = build_problem_I(
            data, measured["theta0_obs"], measured["theta_air_obs"], sigma_meas=cfg.sigma_meas, priors=cfg.priors
        )
    else:
        if cfg.data.t_prime is not None and cfg.data.theta_prime_obs is not None:
            reading = Observation(cfg.data.t_prime, cfg.data.theta_prime_obs)
        elif len(data) == 1:
            reading = data[0]
        else:
            raise ConfigError(f"problem {problem_name} takes one reading; data has {len(data)} rows (set data.t_prime/theta_prime_obs)")
        data = [reading]
        build = build_problem_IIa if problem_name == "IIa" else build_problem_IIb
        problem = build(reading.theta_obs, reading.t, measured["theta_air_obs"], sigma_meas=cfg.sigma_meas, priors=cfg.priors)
    return Prepared(problem, tuple(data), measured, truth)


# ---------------------------------------------------------------- commands


def cmd_simulate(cfg: RunConfig) -> int:
    if cfg.problem == "sweep":
        raise ConfigError("simulate takes problem I, IIa or IIb")
    truth, data, measured = synthesize(cfg)
    os.makedirs(cfg.out, exist_ok=True)
    write_timeseries(os.path.join(cfg.out, "data.csv"), data, "time in hours, temperature in degC")
    write_json(os.path.join(cfg.out, "conditions.json"), measured)
    write_json(os.path.join(cfg.out, "truth.json"), truth.to_dict())
    print(f"wrote {len(data)} observations to {cfg.out}")
    return EXIT_OK


def _trajectory_grid(prep: Prepared, samples: SampleSet, n: int) -> np.ndarray:
    t_data = [o.t for o in prep.data]
    if "t0" in samples.param_names:
        start = float(samples.column("t0").min())
    else:
        start = prep.problem.fixed["t0"]
    return np.linspace(start, max(t_data), n)


def write_report(cfg: RunConfig, prep: Prepared, samples: SampleSet) -> dict:
    out, a = cfg.out, cfg.analysis
    problem = prep.problem
    samples.to_csv(os.path.join(out, "samples.csv"))
    diag = diagnostics(samples)
    diag["converged"] = converged(diag, RHAT_OK)
    write_json(os.path.join(out, "diagnostics.json"), diag)

    summary = analysis.summarize(samples, cfg.level, a.kde_points, a.bandwidth)
    report = {
        "problem": problem.name,
        "n_observations": len(prep.data),
        "measured": prep.measured,
        "fixed": problem.fixed,
        "priors": {n: d.to_dict() for n, d in problem.unknowns},
        "config": config_to_dict(cfg),
        **summary.to_dict(),
    }
    write_json(os.path.join(out, "summary.json"), report)
    write_timeseries(os.path.join(out, "data.csv"), prep.data, "time in hours, temperature in degC")

    for name, ps in summary.params.items():
        prior = np.exp(problem.prior(name).logpdf_array(ps.grid))
        write_csv(os.path.join(out, f"kde_{name}.csv"), ["x", "posterior", "prior"], zip(ps.grid, ps.density, prior))

    n_traj = min(a.n_trajectories, samples.n_chains * samples.n_draws)
    grid = _trajectory_grid(prep, samples, a.time_points)
    ens = analysis.posterior_trajectories(samples, n_traj, grid, problem.fixed, np.random.default_rng(cfg.seed))
    header = ["t", "mean", *(f"draw_{i}" for i in ens.draw_indices)]
    write_csv(os.path.join(out, "trajectories.csv"), header, np.column_stack([ens.times, ens.mean_curve(), ens.curves.T]))

    if problem.name == "I":
        rows = analysis.residual_summary(samples, prep.data, problem.fixed)
        keys = ["t", "theta_obs", "mean", "q1", "median", "q3", "whisker_lo", "whisker_hi"]
        write_csv(os.path.join(out, "residuals.csv"), keys, ([r[k] for k in keys] for r in rows))

    if problem.name == "IIb":
        t0_prior, th_prior = problem.prior("t0"), problem.prior("theta0")
        t0_lo = t0_prior.support()[0]
        xr = (t0_lo, prep.data[0].t) if math.isfinite(t0_lo) else None
        yr = th_prior.support() if all(math.isfinite(v) for v in th_prior.support()) else None
        xc, yc, dens = analysis.joint_density(samples.column("t0"), samples.column("theta0"), a.joint_bins, xr, yr)
        prior_dens = np.exp(t0_prior.logpdf_array(xc)[:, None] + th_prior.logpdf_array(yc)[None, :])
        X, Y = np.meshgrid(xc, yc, indexing="ij")
        write_csv(
            os.path.join(out, "joint_t0_theta0.csv"),
            ["t0", "theta0", "posterior", "prior"],
            zip(X.ravel(), Y.ravel(), dens.ravel(), prior_dens.ravel()),
        )
        # classical curve through the reading, with lam at its prior mean and the measured air temperature
        lam_bar = problem.prior("lam").mu
        reading = prep.data[0]
        t0s = np.linspace(xr[0] if xr else samples.column("t0").min(), reading.t, a.time_points)[:-1]
        curve = classical_solution_curve(reading.t, reading.theta_obs, prep.measured["theta_air_obs"], lam_bar, t0s)
        write_csv(os.path.join(out, "classical_curve.csv"), ["t0", "theta0"], curve)

    if a.svg:
        for name, ps in summary.params.items():
            prior = np.exp(problem.prior(name).logpdf_array(ps.grid))
            svg.line_plot(os.path.join(out, f"kde_{name}.svg"), [(ps.grid, ps.density), (ps.grid, prior, "#888888")], name, name, "density")
        svg.line_plot(
            os.path.join(out, "trajectories.svg"),
            [(ens.times, c, "#1f77b4") for c in ens.curves],
            "posterior trajectories",
            "t [hr]",
            "theta [degC]",
            opacity=0.2,
        )
    return diag


def cmd_infer(cfg: RunConfig) -> int:
    if cfg.problem == "sweep":
        return cmd_sweep(cfg)
    prep = prepare(cfg)
    samples = run_problem(prep.problem, cfg.chains, workers=cfg.workers)
    os.makedirs(cfg.out, exist_ok=True)
    diag = write_report(cfg, prep, samples)
    status = "converged" if diag["converged"] else "NOT converged (some R-hat >= 1.05)"
    print(f"problem {prep.problem.name}: {samples.n_chains} chains x {samples.n_draws} draws, {status}; report in {cfg.out}")
    return EXIT_OK if diag["converged"] else EXIT_NOT_CONVERGED


def cmd_sweep(cfg: RunConfig) -> int:
    truth = _truth(cfg)
    factors = cfg.sweep.t_prime_factors
    t_primes = [f * truth.lam for f in factors]
    # resolve one point up front so prior overrides fail before sampling
    build_problem_IIa(truth.cond.theta0, t_primes[0], truth.cond.theta_air, sigma_meas=cfg.sigma_meas, priors=cfg.priors)
    points = ill_conditioning_sweep(
        truth, t_primes, cfg.chains, cfg.level, workers=cfg.workers, sigma_meas=cfg.sigma_meas, priors=cfg.priors
    )
    os.makedirs(cfg.out, exist_ok=True)
    write_csv(
        os.path.join(cfg.out, "sweep.csv"),
        ["t_prime", "theta_prime_obs", "theta0_mean", "theta0_std", "ci_lower", "ci_upper", "max_rhat"],
        ([p.t_prime, p.theta_prime_obs, p.theta0_mean, p.theta0_std, p.ci[0], p.ci[1], p.max_rhat] for p in points),
    )
    rows = []
    for p in points:
        grid = analysis.kde_grid(p.theta0_draws, cfg.analysis.kde_points, cfg.analysis.bandwidth)
        dens = analysis.kde(p.theta0_draws, grid, cfg.analysis.bandwidth)
        rows.extend((p.t_prime, x, y) for x, y in zip(grid, dens))
    write_csv(os.path.join(cfg.out, "sweep_kde.csv"), ["t_prime", "theta0", "density"], rows)
    write_json(os.path.join(cfg.out, "truth.json"), truth.to_dict())
    ok = all(p.max_rhat < RHAT_OK for p in points)
    for p in points:
        print(f"t'={p.t_prime:.3f} hr  theta0 std={p.theta0_std:.3f}  CI=[{p.ci[0]:.2f}, {p.ci[1]:.2f}]  R-hat={p.max_rhat:.3f}")
    return EXIT_OK if ok else EXIT_NOT_CONVERGED


def cmd_convert(path, direction, out=None) -> int:
    if out is None:
        convert_file(path, sys.stdout, direction)
    else:
        n = convert_file(path, out, direction)
        print(f"wrote {n} rows to {out}", file=sys.stderr)
    return EXIT_OK


def cmd_diagnose(samples_path, out=None) -> int:
    samples = SampleSet.from_csv(samples_path)
    out = out or os.path.dirname(os.path.abspath(samples_path))
    diag = diagnostics(samples)
    diag["converged"] = converged(diag, RHAT_OK)
    os.makedirs(out, exist_ok=True)
    write_json(os.path.join(out, "diagnostics.json"), diag)
    header = ["step", *(f"{n}_chain{c}" for n in samples.param_names for c in range(samples.n_chains))]
    cols = [samples.draws[c, :, k] for k in range(len(samples.param_names)) for c in range(samples.n_chains)]
    write_csv(os.path.join(out, "trace.csv"), header, ([i, *(float(col[i]) for col in cols)] for i in range(samples.n_draws)))
    print(json.dumps(_jsonable({"rhat": diag["rhat"], "ess": diag["ess"]}), sort_keys=True))
    return EXIT_OK if diag["converged"] else EXIT_NOT_CONVERGED


# ---------------------------------------------------------------- argparse


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="limebsi", description="Bayesian inversion of lime heat-transfer experiments")
    sub = p.add_subparsers(dest="command", required=True)

    def run_flags(sp, problems=("I", "IIa", "IIb")):
        sp.add_argument("--config", help="TOML run configuration")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--problem", choices=problems)
        sp.add_argument("--level", type=float, help="credible level, e.g. 0.9")
        sp.add_argument("--data", help="dataset CSV, or a directory written by 'simulate'")
        sp.add_argument("--workers", type=int, help="processes for parallel chains")

    run_flags(sub.add_parser("simulate", help="synthesize a dataset and its ground truth"))
    run_flags(sub.add_parser("infer", help="sample a posterior and write the report bundle"))
    run_flags(sub.add_parser("sweep", help="problem IIa at increasing measurement times"), problems=("IIa",))

    cv = sub.add_parser("convert", help="convert between resistance and temperature logs")
    cv.add_argument("path")
    cv.add_argument("--direction", choices=("r2t", "t2r"), default="r2t")
    cv.add_argument("--out", help="output CSV (default: stdout)")

    dg = sub.add_parser("diagnose", help="R-hat/ESS and trace table for a samples.csv")
    dg.add_argument("samples")
    dg.add_argument("--out", help="output directory (default: alongside samples)")
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "convert":
            return cmd_convert(args.path, args.direction, args.out)
        if args.command == "diagnose":
            return cmd_diagnose(args.samples, args.out)
        problem = args.problem
        if args.command == "sweep":
            problem = "sweep"
        cfg = load_config(
            args.config,
            problem=problem,
            seed=args.seed,
            out=args.out,
            level=args.level,
            data=args.data,
            workers=args.workers,
        )
        if args.command == "sweep" and cfg.problem != "sweep":
            cfg = replace(cfg, problem="sweep")
        return {"simulate": cmd_simulate, "infer": cmd_infer, "sweep": cmd_sweep}[args.command](cfg)
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
