"""Block versus accelerated RPCholesky on the smile point set.

Prints the relative trace error of simple, block and accelerated RPCholesky
for several seeds, and the accelerated/block ratio.

    python scripts/smile_gap.py --n 10000 --rank 300 --block 60 --seeds 5
"""
import argparse

import numpy as np

from rpchol import DataMatrix, KernelOracle, KernelSpec, RunConfig
from rpchol.cholesky import NumericalError, accelerated_rpcholesky, block_rpcholesky, relative_trace_error, \
    simple_rpcholesky
from rpchol.datasets import smile


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--sigma", type=float, default=0.2)
    p.add_argument("--rank", type=int, default=300)
    p.add_argument("--block", type=int, default=60)
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--mode", default="direct", choices=["direct", "gram"])
    args = p.parse_args()

    spec = KernelSpec("gaussian", args.sigma)
    ratios = []
    print(f"{'seed':>4} {'simple':>10} {'block':>10} {'accel':>10} {'ratio':>8}")
    for seed in range(args.seeds):
        oracle = KernelOracle(DataMatrix(smile(args.n, seed=seed)), spec, mode=args.mode)
        cfg = RunConfig(block_size=args.block, rank=args.rank, seed=seed)
        simple = relative_trace_error(oracle, simple_rpcholesky(oracle, args.rank, seed=seed)[0])
        acc = relative_trace_error(oracle, accelerated_rpcholesky(oracle, cfg)[0])
        try:
            blk = relative_trace_error(oracle, block_rpcholesky(oracle, cfg)[0])
        except NumericalError as exc:
            print(f"{seed:>4} block failed: {exc}")
            continue
        ratios.append(acc / blk)
        print(f"{seed:>4} {simple:10.3e} {blk:10.3e} {acc:10.3e} {acc / blk:8.4f}")
    if ratios:
        print(f"median accelerated/block ratio: {np.median(ratios):.4f}")


if __name__ == "__main__":
    main()
