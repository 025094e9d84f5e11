"""How the posterior of the initial lime temperature spreads as the reading is taken later.

    python3 scripts/ill_conditioning_sweep.py --factors 0.5 1 2 3 4 --workers 4
"""
import argparse
import csv
import sys

from scipy import stats

from limebsi.forward_model import ExperimentConditions, error_amplification
from limebsi.problems import GroundTruth, ill_conditioning_sweep
from limebsi.sampler import ChainConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lam", type=float, default=0.98)
    ap.add_argument("--factors", type=float, nargs="+", default=[0.5, 1, 2, 3, 4], help="t' in units of lam")
    ap.add_argument("--steps", type=int, default=50_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--csv", default=None, help="write the table here instead of stdout")
    args = ap.parse_args()

    truth = GroundTruth(args.lam, ExperimentConditions(0.0, 5.0, 20.0), 0.16, args.seed)
    t_primes = [f * args.lam for f in args.factors]
    points = ill_conditioning_sweep(truth, t_primes, ChainConfig(n_chains=4, n_steps=args.steps, seed=args.seed), workers=args.workers)

    out = open(args.csv, "w", newline="") if args.csv else sys.stdout
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["t_prime", "amplification", "theta0_mean", "theta0_std", "ci_lower", "ci_upper", "ks_to_prior", "max_rhat"])
    for p in points:
        ks = stats.kstest(p.theta0_draws, stats.uniform(0, 15).cdf).statistic
        w.writerow([f"{p.t_prime:.3f}", f"{error_amplification(p.t_prime, 0.0, args.lam):.3f}", f"{p.theta0_mean:.3f}",
                    f"{p.theta0_std:.3f}", f"{p.ci[0]:.3f}", f"{p.ci[1]:.3f}", f"{ks:.3f}", f"{p.max_rhat:.4f}"])
    if args.csv:
        out.close()


if __name__ == "__main__":
    main()
