"""Kernel columns generated per second as a function of block size.

    python scripts/column_throughput.py --n 10000 --dim 1000 --blocks 1,10,100,1000
"""
import argparse

import numpy as np

from rpchol import DataMatrix, KernelSpec
from rpchol.experiment import bench_column_throughput


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--dim", type=int, default=1000)
    p.add_argument("--kernel", default="gaussian")
    p.add_argument("--blocks", default="1,10,100,1000")
    p.add_argument("--columns", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    data = DataMatrix(np.random.default_rng(args.seed).standard_normal((args.n, args.dim)))
    spec = KernelSpec(args.kernel, np.sqrt(args.dim))
    rows = bench_column_throughput(data, spec, [int(b) for b in args.blocks.split(",")], args.columns, args.seed)
    base = {r["mode"]: r["columns_per_second"] for r in rows if r["block_size"] == rows[0]["block_size"]}
    print(f"{'b':>6} {'mode':>7} {'columns/s':>12} {'per-column gain':>16}")
    for r in rows:
        gain = r["columns_per_second"] / base[r["mode"]]
        print(f"{r['block_size']:>6} {r['mode']:>7} {r['columns_per_second']:12.0f} {gain:16.1f}")


if __name__ == "__main__":
    main()
