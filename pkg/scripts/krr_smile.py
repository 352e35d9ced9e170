"""PCG with and without a Nystrom preconditioner for KRR on the smile.

    python scripts/krr_smile.py --n 2000 --rank 200 --seeds 5
"""
import argparse

import numpy as np

from rpchol import KernelSpec, RunConfig
from rpchol.datasets import smile
from rpchol.krr import fit_krr


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--sigma", type=float, default=0.2)
    p.add_argument("--rank", type=int, default=200)
    p.add_argument("--block", type=int, default=50)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--seeds", type=int, default=5)
    args = p.parse_args()

    spec = KernelSpec("gaussian", args.sigma)
    print(f"{'seed':>4} {'CG iters':>9} {'PCG iters':>10} {'PCG |A b - y|/|y|':>18}")
    for seed in range(args.seeds):
        X = smile(args.n, seed=seed)
        y = np.sin(X[:, 0] / 3) + np.cos(X[:, 1] / 2)
        _, plain = fit_krr(X, y, spec, tol=args.tol)
        cfg = RunConfig(block_size=args.block, rank=args.rank, seed=seed)
        _, pre = fit_krr(X, y, spec, precond_rank=args.rank, config=cfg, tol=args.tol)
        print(f"{seed:>4} {plain.iterations:>9} {pre.iterations:>10} {pre.unregularized_residuals[-1]:18.3e}")


if __name__ == "__main__":
    main()
