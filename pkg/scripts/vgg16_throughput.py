"""Modeled VGG16 throughput on the Virtex-7 690T budget.

Prints the MAC counts of the built-in VGG16 descriptor, the FPS of a fixed design
point at a few pruning rates, and the design-space optimum for a utilization table
(a sweep CSV, or random masks measured on the spot).

    python scripts/vgg16_throughput.py
    python scripts/vgg16_throughput.py --table runs/sweep.csv --util 0.99 0.96
"""

import argparse

import numpy as np

from specprune import dse
from specprune.accel_sim import random_mask_kernels, utilization_sweep
from specprune.sparse_format import keep_count


def measured_table(alpha, n, p_os, rs, seed, channels=64):
    rng = np.random.default_rng(seed)
    table = dse.UtilizationTable()
    for p in p_os:
        ks = random_mask_kernels(p, channels, n, keep_count(n, alpha), rng)
        for row in utilization_sweep(ks, [p], rs, workers=4):
            table.add(p, row["R"], alpha, row["utilization"])
    return table


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--table", help="utilization CSV (P_o, R, alpha, utilization)")
    ap.add_argument("--n", type=int, default=8)
    ap.add_argument("--alpha", type=float, nargs="+", default=[4.0, 8.0])
    ap.add_argument("--util", type=float, nargs="+", default=[0.99, 0.96],
                    help="utilization assumed at the fixed design point, one per alpha")
    ap.add_argument("--P_b", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if len(args.util) != len(args.alpha):
        ap.error("--util needs one value per --alpha")

    plat = dse.VIRTEX7_690T
    dense = dse.vgg16_workload(args.n, 1.0)
    print(f"spatial MACs/image  {dense.spatial_macs_per_image():,}")
    print(f"spectral MACs/image {dense.macs_per_image():,} (dense, ratio {dense.spatial_macs_per_image() / dense.macs_per_image():.2f})")

    print("\nfixed design point P_b=10 P_o=64 R=16 at 200 MHz")
    for alpha, u in zip(args.alpha, args.util):
        wl = dse.vgg16_workload(args.n, alpha)
        dp = dse.DesignPoint(R=16, P_b=10, P_o=64, lam=1 / u)
        print(f"  alpha={alpha:g} util={u:.2f}: {dse.fps(dp, plat, wl):7.1f} fps, "
              f"{dse.required_bandwidth_bytes(dp, plat, wl) / 1e9:.2f} GB/s")

    print("\ndesign-space optimum")
    for alpha in args.alpha:
        wl = dse.vgg16_workload(args.n, alpha)
        if args.table:
            table = dse.UtilizationTable.from_csv(args.table)
        else:
            table = measured_table(alpha, args.n, dse.powers_of_two(256), [1, 2, 4, 8, 16], args.seed)
        best, _ = dse.explore(plat, wl, table, p_b=args.P_b)
        print(f"  alpha={alpha:g}: P_b={best.P_b} P_o={best.P_o} R={best.R} util={best.utilization:.3f} "
              f"fps={best.fps:.1f} bram={best.bram_used:g} dsp={best.dsp_used}")


if __name__ == "__main__":
    main()
