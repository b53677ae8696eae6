#!/usr/bin/env python3
"""Two-class Gaussian blob fixture (data/blobs-train.csv, data/blobs-test.csv).

Class 0 is centred at +1 in every coordinate, class 1 at -1, unit spread.
Rows are samples; the last column is the label.
"""
import argparse
import os

import numpy as np


def blobs(rng, n, dim):
    labels = np.arange(n) % 2
    x = rng.standard_normal((n, dim)) + np.where(labels[:, None] == 0, 1.0, -1.0)
    return x, labels


def write(path, x, labels):
    with open(path, "w") as f:
        for row, lab in zip(x, labels):
            f.write(",".join(f"{v:.6f}" for v in row) + f",{lab}\n")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="data")
    ap.add_argument("--dim", type=int, default=10)
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    os.makedirs(args.out, exist_ok=True)
    write(os.path.join(args.out, "blobs-train.csv"), *blobs(rng, args.n, args.dim))
    write(os.path.join(args.out, "blobs-test.csv"), *blobs(rng, args.n, args.dim))


if __name__ == "__main__":
    main()
