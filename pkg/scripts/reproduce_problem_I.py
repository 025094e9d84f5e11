"""Problem I on synthetic data: recover the lime time constant from a cooling curve.

    python3 scripts/reproduce_problem_I.py --n-obs 20 --seed 0 --out out/problem_I
"""
import argparse
import json
import os

import numpy as np

from limebsi import analysis
from limebsi.forward_model import ExperimentConditions
from limebsi.problems import GroundTruth, build_problem_I, default_schedule, measure, run_problem, synthesize_data
from limebsi.sampler import ChainConfig, diagnostics


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lam", type=float, default=0.98)
    ap.add_argument("--sigma", type=float, default=0.16)
    ap.add_argument("--n-obs", type=int, default=20)
    ap.add_argument("--steps", type=int, default=50_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default=None, help="directory for summary.json (optional)")
    args = ap.parse_args()

    truth = GroundTruth(args.lam, ExperimentConditions(0.0, 5.0, 20.0), args.sigma, args.seed)
    rng = np.random.default_rng(args.seed)
    data = synthesize_data(truth, default_schedule(args.lam, args.n_obs), rng)
    problem = build_problem_I(data, measure(5.0, args.sigma, rng), measure(20.0, args.sigma, rng))
    samples = run_problem(problem, ChainConfig(n_chains=4, n_steps=args.steps, seed=args.seed))

    summary = analysis.summarize(samples, 0.9, n_grid=256).to_dict()
    diag = diagnostics(samples)
    for name, s in summary["params"].items():
        print(f"{name:>9s}: mean {s['mean']:.4f}  std {s['std']:.4f}  90% CI [{s['ci_lower']:.4f}, {s['ci_upper']:.4f}]"
              f"  R-hat {diag['rhat'][name]:.3f}  ESS {diag['ess'][name]:.0f}")
    lam = summary["params"]["lam"]
    print(f"truth lam = {args.lam}; CI width {lam['ci_upper'] - lam['ci_lower']:.4f} hr")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "summary.json"), "w") as f:
            json.dump({"truth": truth.to_dict(), "summary": summary, "diagnostics": diag}, f, indent=2, sort_keys=True)


if __name__ == "__main__":
    main()
