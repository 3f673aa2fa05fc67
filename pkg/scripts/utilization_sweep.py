"""Measured DSP utilization over a (P_o, R) grid.

Without --kernels, independent random masks are drawn at each pruning rate; with
--kernels the layers of an SPK1 file are measured instead. Writes a CSV that
`specprune explore --table` accepts.

    python scripts/utilization_sweep.py --alpha 2 4 8 --out runs/sweep.csv
    python scripts/utilization_sweep.py --kernels runs/default/kernels.spk
"""

import argparse
import csv

import numpy as np

from specprune.accel_sim import random_mask_kernels, utilization_sweep
from specprune.sparse_format import keep_count, load_kernels


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--kernels", help="SPK1 file; omit for random masks")
    ap.add_argument("--alpha", type=float, nargs="+", default=[4.0])
    ap.add_argument("--P_o", type=int, nargs="+", default=[4, 8, 16, 32, 64])
    ap.add_argument("--R", type=int, nargs="+", default=[1, 2, 4, 8, 16])
    ap.add_argument("--channels", type=int, default=64, help="input channels per random set")
    ap.add_argument("--n", type=int, default=8)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=4)
    ap.add_argument("--out", default="sweep.csv")
    args = ap.parse_args()

    rows = []
    if args.kernels:
        rows = utilization_sweep(load_kernels(args.kernels), args.P_o, args.R, workers=args.threads)
    else:
        rng = np.random.default_rng(args.seed)
        for alpha in args.alpha:
            k = keep_count(args.n, alpha)
            for p in args.P_o:
                ks = random_mask_kernels(p, args.channels, args.n, k, rng)
                rows += utilization_sweep(ks, [p], args.R, workers=args.threads)

    with open(args.out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["P_o", "R", "alpha", "utilization", "cycles"])
        w.writeheader()
        w.writerows(rows)
    for r in rows:
        print(f"alpha={r['alpha']:<4g} P_o={r['P_o']:<3d} R={r['R']:<3d} utilization={r['utilization']:.4f}")
    print(f"wrote {len(rows)} rows to {args.out}")


if __name__ == "__main__":
    main()
