#!/usr/bin/env python3
"""Build the small IDX fixtures under data/ used by the acceptance suite.

Sources (both redistributable, neither needs network beyond a package mirror):
  * MNIST 5k subset shipped inside the mlxtend wheel (mlxtend/data/data/mnist_5k.csv.gz)
  * Fashion-MNIST images shipped in the `fashion-mnist` npm package (src/clothes/<class>.json)

Usage:
  pip download mlxtend --no-deps -d /tmp/dl
  npm pack fashion-mnist@1.1.0 && tar xzf fashion-mnist-1.1.0.tgz
  python3 tools/make_fixtures.py --mlxtend-wheel /tmp/dl/mlxtend-*.whl \
      --fashion-dir package/src/clothes --out data
"""
import argparse
import gzip
import json
import os
import struct
import zipfile

import numpy as np


def write_idx_images(path, images):
    n, h, w = images.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, n, h, w))
        f.write(images.astype(np.uint8).tobytes())


def write_idx_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(np.asarray(labels, dtype=np.uint8).tobytes())


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--mlxtend-wheel", required=True)
    ap.add_argument("--fashion-dir", required=True)
    ap.add_argument("--fashion-per-class", type=int, default=100)
    ap.add_argument("--out", default="data")
    ap.add_argument("--seed", type=int, default=20240501)
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)
    rng = np.random.default_rng(args.seed)

    with zipfile.ZipFile(args.mlxtend_wheel) as z:
        raw = gzip.decompress(z.read("mlxtend/data/data/mnist_5k.csv.gz"))
    table = np.loadtxt(raw.decode().splitlines(), delimiter=",", dtype=np.int64)
    pixels, labels = table[:, :-1], table[:, -1]
    order = rng.permutation(len(labels))  # source file is sorted by class
    write_idx_images(os.path.join(args.out, "mnist5k-images.idx3-ubyte"),
                     pixels[order].reshape(-1, 28, 28))
    write_idx_labels(os.path.join(args.out, "mnist5k-labels.idx1-ubyte"), labels[order])

    images, fl = [], []
    for c in range(10):
        with open(os.path.join(args.fashion_dir, f"{c}.json")) as f:
            rows = json.load(f)["data"][: args.fashion_per_class]
        images.extend(rows)
        fl.extend([c] * len(rows))
    images = np.asarray(images, dtype=np.int64)
    order = rng.permutation(len(fl))
    write_idx_images(os.path.join(args.out, "fashion1k-images.idx3-ubyte"),
                     images[order].reshape(-1, 28, 28))
    write_idx_labels(os.path.join(args.out, "fashion1k-labels.idx1-ubyte"),
                     np.asarray(fl)[order])


if __name__ == "__main__":
    main()
