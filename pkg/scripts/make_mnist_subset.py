"""Build the balanced MNIST-1k train / 1k test IDX files shipped in data/mnist-1k.

Source: the 5,000-image MNIST sample bundled with mlxtend (BSD-3), which stores
one image per CSV row (784 pixels then the label).

    pip download mlxtend --no-deps -d /tmp/mlx
    python scripts/make_mnist_subset.py --csv <path to mnist_5k.csv.gz> --out data/mnist-1k
"""

import argparse
import gzip
import os

import numpy as np

from specprune.mnist import MNIST_FILES, write_idx


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--csv", required=True)
    ap.add_argument("--out", default="data/mnist-1k")
    ap.add_argument("--per-class", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    opener = gzip.open if args.csv.endswith(".gz") else open
    with opener(args.csv, "rt") as fh:
        table = np.loadtxt(fh, delimiter=",")
    pixels = table[:, :-1].astype(np.uint8).reshape(-1, 28, 28)
    labels = table[:, -1].astype(np.uint8)

    rng = np.random.default_rng(args.seed)
    train_idx, test_idx = [], []
    for digit in range(10):
        members = rng.permutation(np.flatnonzero(labels == digit))
        train_idx.extend(members[: args.per_class])
        test_idx.extend(members[args.per_class : 2 * args.per_class])
    train_idx = rng.permutation(train_idx)
    test_idx = rng.permutation(test_idx)

    os.makedirs(args.out, exist_ok=True)
    for split, idx in (("train", train_idx), ("test", test_idx)):
        write_idx(os.path.join(args.out, MNIST_FILES[f"{split}_images"] + ".gz"), pixels[idx])
        write_idx(os.path.join(args.out, MNIST_FILES[f"{split}_labels"] + ".gz"), labels[idx])
    print(f"wrote {len(train_idx)} train / {len(test_idx)} test images to {args.out}")


if __name__ == "__main__":
    main()
