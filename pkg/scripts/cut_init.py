"""Epoch at which the evaluation loss first drops below a threshold, for several cut constants."""

import argparse
import csv
import sys

from normlab import latentgen, network


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cuts", type=float, nargs="+", default=[1.0, 2.0, 4.0, 8.0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    ap.add_argument("--epochs", type=int, default=20)
    ap.add_argument("--weight-decay", type=float, default=5e-4)
    ap.add_argument("--threshold", type=float, default=4.125)
    args = ap.parse_args()

    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["seed", "cut", "initial_norm", "crossing_epoch", "final_loss"])
    for seed in args.seeds:
        ds = latentgen.generate(latentgen.LatentSpec(seed=seed))
        for c in args.cuts:
            cfg = network.TrainConfig(epochs=args.epochs, weight_decay=args.weight_decay, cut_constant=c, seed=seed)
            _, traces = network.train(ds, cfg)
            crossing = next((t.epoch for t in traces if t.mean_loss < args.threshold), "never")
            w.writerow([seed, c, f"{traces[0].mean_embedding_norm:.5f}", crossing, f"{traces[-1].mean_loss:.4f}"])
        sys.stdout.flush()


if __name__ == "__main__":
    main()
