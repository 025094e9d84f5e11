"""Frequentist coverage of the problem-I credible interval for lam over synthetic replicates."""
import argparse

import numpy as np
from scipy import stats

from limebsi.analysis import equal_tailed_ci
from limebsi.forward_model import ExperimentConditions
from limebsi.problems import GroundTruth, build_problem_I, default_schedule, measure, run_problem, synthesize_data
from limebsi.sampler import ChainConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--replicates", type=int, default=50)
    ap.add_argument("--level", type=float, default=0.9)
    ap.add_argument("--steps", type=int, default=12_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    lam = 0.98
    truth = GroundTruth(lam, ExperimentConditions(0.0, 5.0, 20.0), 0.16, args.seed)
    hits, widths = 0, []
    for r in range(args.replicates):
        rng = np.random.default_rng([args.seed, r])
        data = synthesize_data(truth, default_schedule(lam), rng)
        problem = build_problem_I(data, measure(5.0, 0.16, rng), measure(20.0, 0.16, rng))
        s = run_problem(problem, ChainConfig(n_chains=4, n_steps=args.steps, seed=args.seed * 1000 + r))
        lo, hi = equal_tailed_ci(s.column("lam"), args.level)
        hits += lo <= lam <= hi
        widths.append(hi - lo)
        print(f"replicate {r:3d}: [{lo:.4f}, {hi:.4f}] {'hit' if lo <= lam <= hi else 'MISS'}")
    ci = stats.binomtest(hits, args.replicates).proportion_ci(0.95)
    print(f"coverage {hits}/{args.replicates} = {hits / args.replicates:.1%} (binomial 95% CI {ci.low:.2f}-{ci.high:.2f}); "
          f"mean width {np.mean(widths):.4f} hr")


if __name__ == "__main__":
    main()
