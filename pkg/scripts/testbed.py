"""Opt-in testbed: speedup and error ratio against simple RPCholesky.

Covers the synthetic examples (smile and spiral at three length scales, an
outlier cloud with 50/500/5000 outliers), Gaussian clouds in d = 2, 10, 100,
1000 under three kernels and three bandwidths, and any LIBSVM or CSV files
passed with --data.  Examples whose simple RPCholesky error is below 1e-13
are reported and flagged, not dropped.  At the default N = 10^4 a full run
takes a long time; use --quick for a reduced sweep.

    python scripts/testbed.py --n 10000 --rank 1000 --block 150 --out testbed.csv
"""
import argparse
import csv
import time
from pathlib import Path

import numpy as np

from rpchol import DataMatrix, KernelOracle, KernelSpec
from rpchol.datasets import gaussian_cloud, outlier_cloud, smile, spiral
from rpchol.experiment import run_method
from rpchol.fileio import read_libsvm, read_points_csv
from rpchol.kernels import median_bandwidth

METHODS = ("simple", "block", "accelerated")


def examples(n, seed, extra, quick):
    scales = (1.0,) if quick else (0.5, 1.0, 2.0)
    for s in scales:
        yield f"smile_x{s}", smile(n, seed=seed) * s, "gaussian", 1.0
        yield f"spiral_x{s}", spiral(n, scale=s, seed=seed), "gaussian", 1.0
    for k in ((50,) if quick else (50, 500, 5000)):
        if k < n:
            yield f"outliers_{k}", outlier_cloud(n, n_outliers=k, seed=seed)[0], "gaussian", 1.0
    dims = (2, 10) if quick else (2, 10, 100, 1000)
    kernels = ("gaussian",) if quick else ("gaussian", "matern32", "l1laplace")
    for d in dims:
        X = gaussian_cloud(n, d, seed=seed)
        for kern in kernels:
            for f in ((1.0,) if quick else (0.5, 1.0, 2.0)):
                yield f"cloud_d{d}_{kern}_x{f}", X, kern, f * np.sqrt(d)
    for path in extra:
        path = Path(path)
        X = read_libsvm(path)[0] if path.suffix in (".svm", ".libsvm", "") else read_points_csv(path)
        if X.shape[0] > n:
            X = X[np.random.default_rng(seed).choice(X.shape[0], n, replace=False)]
        sigma = median_bandwidth(DataMatrix(X), seed=seed)
        for kern in ("gaussian", "matern32", "l1laplace"):
            yield f"{path.stem}_{kern}", X, kern, sigma


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--rank", type=int, default=1000)
    p.add_argument("--block", type=int, default=150)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--data", nargs="*", default=[])
    p.add_argument("--quick", action="store_true")
    p.add_argument("--out", default="testbed.csv")
    args = p.parse_args()

    cols = ["example", "kernel", "sigma", "method", "rel_trace_error", "seconds", "speedup", "error_ratio", "flag"]
    with open(args.out, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=cols)
        w.writeheader()
        for name, X, kern, sigma in examples(args.n, args.seed, args.data, args.quick):
            oracle = KernelOracle(DataMatrix(X), KernelSpec(kern, sigma))
            k = min(args.rank, X.shape[0])
            res = {}
            for m in METHODS:
                t0 = time.perf_counter()
                try:
                    err = run_method(m, oracle, k, args.block, np.random.SeedSequence([args.seed, 0]))[0]
                except Exception as exc:  # keep sweeping; the row records the failure
                    res[m] = (float("nan"), float("nan"), type(exc).__name__)
                    continue
                res[m] = (err, time.perf_counter() - t0, "")
            base_err, base_t, _ = res["simple"]
            for m, (err, secs, fail) in res.items():
                flag = fail or ("below_1e-13" if base_err < 1e-13 else "")
                w.writerow({"example": name, "kernel": kern, "sigma": sigma, "method": m,
                            "rel_trace_error": err, "seconds": secs, "speedup": base_t / secs,
                            "error_ratio": err / base_err if base_err > 0 else float("nan"), "flag": flag})
            f.flush()
            print(name, kern, ", ".join(f"{m}={e:.2e}" for m, (e, _, _) in res.items()))


if __name__ == "__main__":
    main()
