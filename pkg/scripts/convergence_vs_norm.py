"""Steps to converge for embedding pairs as the starting norm grows.

    python scripts/convergence_vs_norm.py --norms 1 2 4 8 --alphas 0 -0.5 -0.99
"""

import argparse
import csv
import sys

import numpy as np

from normlab import descent


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--norms", type=float, nargs="+", default=[1, 2, 4, 8])
    ap.add_argument("--alphas", type=float, nargs="+", default=[0.0, -0.99])
    ap.add_argument("--dimension", type=int, default=20)
    ap.add_argument("--pairs", type=int, default=500)
    ap.add_argument("--lr", type=float, default=0.1)
    ap.add_argument("--mode", choices=["attraction_only", "infonce"], default="attraction_only")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    cfg = descent.DescentConfig(learning_rate=args.lr, mode=args.mode)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["alpha", "norm", "outcome", "steps"])
    for alpha in args.alphas:
        steps = []
        for rho in args.norms:
            r = descent.run_to_convergence(
                descent.PairInitSpec(args.dimension, args.pairs, rho, alpha, args.seed), cfg)
            w.writerow([alpha, rho, r.outcome, r.steps])
            steps.append(r.steps)
        if len(args.norms) > 1 and min(steps) > 0:
            slope = np.polyfit(np.log(args.norms), np.log(steps), 1)[0]
            print(f"# alpha={alpha}: log-log slope {slope:.3f}", file=sys.stderr)


if __name__ == "__main__":
    main()
