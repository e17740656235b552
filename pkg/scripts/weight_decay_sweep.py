"""Convergence under weight decay: steps per (decay, norm) cell.

With a multiplicative shrink of 1 - 2*lr*wd per step, any wd >= 1/(2*lr)
wipes out the embeddings in a single step.
"""

import argparse
import csv
import sys

from normlab import descent


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--norms", type=float, nargs="+", default=[1, 4, 7])
    ap.add_argument("--decays", type=float, nargs="+", default=[0.5, 1.0, 10.0])
    ap.add_argument("--lrs", type=float, nargs="+", default=[0.1])
    ap.add_argument("--pairs", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["lr", "wd", "norm", "outcome", "steps", "final_mean_cos"])
    for lr in args.lrs:
        for wd in args.decays:
            cfg = descent.DescentConfig(learning_rate=lr, weight_decay=wd)
            for rho in args.norms:
                r = descent.run_to_convergence(descent.PairInitSpec(20, args.pairs, rho, 0.0, args.seed), cfg)
                w.writerow([lr, wd, rho, r.outcome, r.steps, f"{r.final_mean_cos:.6f}"])


if __name__ == "__main__":
    main()
