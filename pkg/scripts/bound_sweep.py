"""Where does the one-step cosine-change bound 2*lr*sin^2(phi)/rho^2 hold?

Sweeps equal-norm pairs over the starting cosine and reports the largest
excess of the actual change over the bound. Violations appear only for
obtuse pairs with -cos(phi) * rho^2 >= lr * sin^2(phi).
"""

import argparse
import csv
import sys

import numpy as np

from normlab import descent


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--norms", type=float, nargs="+", default=[0.5, 1, 2, 8])
    ap.add_argument("--lrs", type=float, nargs="+", default=[0.01, 0.1, 1.0])
    ap.add_argument("--grid", type=int, default=41)
    args = ap.parse_args()

    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["norm", "lr", "cos", "delta", "bound", "excess", "predicted_violation"])
    for rho in args.norms:
        for lr in args.lrs:
            for c in np.linspace(-0.975, 0.975, args.grid):
                z_i = rho * np.array([1.0, 0.0])
                z_j = rho * np.array([c, np.sqrt(1 - c * c)])
                delta, bound = descent.theorem_bound_check(z_i, z_j, lr)
                predicted = -c * rho * rho >= lr * (1 - c * c)
                w.writerow([rho, lr, f"{c:.3f}", f"{delta:.6g}", f"{bound:.6g}", f"{delta - bound:.3g}",
                            int(predicted)])


if __name__ == "__main__":
    main()
