"""Train, prune and retrain the toy spectral CNN, then compare the pruned masks'
utilization against independent random masks of the same shape and sparsity.

    python scripts/prune_toy.py                        # bundled MNIST-1k, about 6 minutes
    python scripts/prune_toy.py --synthetic --epochs 10 --lr 0.3
"""

import argparse
import json
import os

import numpy as np

from specprune import admm
from specprune import toy_model as tm
from specprune.accel_sim import random_mask_kernels, utilization_sweep
from specprune.mnist import load_mnist, synthetic_digits
from specprune.sparse_format import save_kernels

REPO = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--synthetic", action="store_true", help="use the 8x8 synthetic digits instead of MNIST")
    ap.add_argument("--data", default=os.path.join(REPO, "data", "mnist-1k"))
    ap.add_argument("--epochs", type=int, default=20)
    ap.add_argument("--lr", type=float, default=0.1)
    ap.add_argument("--alpha", type=float, default=4.0)
    ap.add_argument("--iterations", type=int, default=10)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", default="runs/prune_toy")
    args = ap.parse_args()

    if args.synthetic:
        spec = tm.SYNTHETIC_TOY
        train, test = synthetic_digits(400, seed=args.seed), synthetic_digits(400, seed=args.seed + 1)
    else:
        spec = tm.MNIST_TOY
        train, test = load_mnist(args.data, "train"), load_mnist(args.data, "test")

    rng = np.random.default_rng(args.seed)
    params = tm.init_params(spec, rng)
    admm.train_dense(spec, params, train, args.epochs, args.lr, admm.AdmmConfig(), rng)
    cfg = admm.AdmmConfig(alpha=args.alpha, iterations=args.iterations, seed=args.seed)
    res = admm.run_pruning(spec, params, train, test, cfg)

    os.makedirs(args.out, exist_ok=True)
    res.write_log(os.path.join(args.out, "prune_log.csv"))
    save_kernels(os.path.join(args.out, "kernels.spk"), res.kernels)

    pruned = {r["R"]: r["utilization"] for r in utilization_sweep(res.kernels, [16], [1, 2, 4, 8, 16])}
    rand = {}
    for s in range(5):
        g = np.random.default_rng(s)
        sets = [random_mask_kernels(ks.c_out, ks.c_in, ks.n, ks.k, g) for ks in res.kernels]
        for r in utilization_sweep(sets, [16], [1, 2, 4, 8, 16]):
            rand.setdefault(r["R"], []).append(r["utilization"])
    rand = {R: float(np.mean(v)) for R, v in rand.items()}

    for row in res.log:
        if row["phase"] == "admm":
            print(f"admm {row['iteration']:2d}  ||W-Z|| {row['w_z_distance']:.3f}  acc {row['accuracy']:.3f}")
    print(" ".join(f"{k}={v:.3f}" for k, v in res.accuracy.items()))
    print("P_o=16 utilization, pruned vs random masks:")
    for R in sorted(pruned):
        print(f"  R={R:<2d} {pruned[R]:.4f}  {rand[R]:.4f}")
    with open(os.path.join(args.out, "summary.json"), "w") as fh:
        json.dump({"accuracy": res.accuracy, "pruned_util": pruned, "random_util": rand}, fh, indent=2)


if __name__ == "__main__":
    main()
