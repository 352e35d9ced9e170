"""Experiment runner, CSV reporting and the column-throughput harness."""
from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cholesky import (
    NumericalError,
    RunConfig,
    accelerated_rpcholesky,
    block_rpcholesky,
    rbrp_cholesky,
    relative_trace_error,
    simple_rpcholesky,
)
from .datasets import DatasetSpec, generate_dataset
from .kernels import DataMatrix, DenseOracle, DistanceMode, KernelOracle, KernelSpec, median_bandwidth
from .lowmem import accelerated_rpcholesky_lowmem

__all__ = [
    "METHODS",
    "ExperimentConfig",
    "ExperimentReport",
    "run_method",
    "run_experiment",
    "write_report_csv",
    "plot_data_export",
    "bench_column_throughput",
    "write_rows_csv",
]

log = logging.getLogger(__name__)

METHODS = ("simple", "block", "accelerated", "accelerated_lowmem", "rbrp")
DENSE_THRESHOLD = 2 ** 14
REPORT_COLUMNS = ["method", "rank", "trial", "rel_trace_error", "wall_ms", "acceptance_rate",
                  "accepted_rank", "ratio_vs_simple", "error"]
PLOT_COLUMNS = ["method", "rank", "trial", "rel_trace_error", "wall_ms", "acceptance_rate"]


@dataclass
class ExperimentConfig:
    """One experiment: every method at every rank, ``trials`` times.

    ``bandwidth`` may be a number or ``"median"`` for the median heuristic.
    ``materialize`` caches the kernel matrix when N is at most
    ``dense_threshold``; larger problems always go through the kernel oracle.
    """

    dataset: DatasetSpec
    kernel: str = "gaussian"
    bandwidth: float | str = "median"
    methods: list = field(default_factory=lambda: ["simple", "accelerated"])
    ranks: list = field(default_factory=lambda: [100])
    block_size: int = 20
    trials: int = 1
    seed: int = 0
    distance_mode: str | None = None
    threads: int = 1
    warmup: bool = True
    materialize: bool = False
    dense_threshold: int = DENSE_THRESHOLD

    def __post_init__(self):
        if isinstance(self.ranks, int):
            self.ranks = [self.ranks]
        self.methods = [m.lower().replace("-", "_") for m in self.methods]
        if not self.methods:
            raise ValueError("at least one method is required")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown method(s) {bad}; expected {METHODS}")
        if not self.ranks or min(self.ranks) < 1:
            raise ValueError("ranks must be positive")
        if self.block_size < 1 or self.trials < 1 or self.threads < 1:
            raise ValueError("block_size, trials and threads must be positive")
        if self.dataset.kind != "file" and max(self.ranks) > self.dataset.n_points:
            raise ValueError("rank exceeds the number of points")


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    rows: list
    bandwidth: float

    def aggregates(self) -> list:
        """Mean and standard deviation of error and time per (method, rank)."""
        out = []
        for method in self.config.methods:
            for k in self.config.ranks:
                ok = [r for r in self.rows if r["method"] == method and r["rank"] == k and not r["error"]]
                if not ok:
                    continue
                err = np.array([r["rel_trace_error"] for r in ok])
                ms = np.array([r["wall_ms"] for r in ok])
                ratio = np.array([r["ratio_vs_simple"] for r in ok], dtype=float)
                out.append({
                    "method": method, "rank": k, "runs": len(ok),
                    "mean_error": err.mean(), "std_error": err.std(),
                    "mean_wall_ms": ms.mean(), "std_wall_ms": ms.std(),
                    "mean_ratio_vs_simple": np.nanmean(ratio) if np.isfinite(ratio).any() else float("nan"),
                })
        return out


def _trial_seed(seed: int, trial: int) -> np.random.SeedSequence:
    # every method sees the same stream for a given trial (common random numbers)
    return np.random.SeedSequence([seed, trial])


def run_method(method: str, oracle, rank: int, block_size: int, seed):
    """Run one method until ``rank`` pivots are accepted.

    Returns ``(rel_trace_error, acceptance_rate, accepted_rank)``.
    """
    cfg = RunConfig(block_size=block_size, rank=rank, seed=seed)
    if method == "simple":
        approx, trace = simple_rpcholesky(oracle, rank, seed=seed)
    elif method == "block":
        approx, trace = block_rpcholesky(oracle, cfg)
    elif method == "accelerated":
        approx, trace = accelerated_rpcholesky(oracle, cfg)
    elif method == "rbrp":
        approx, trace = rbrp_cholesky(oracle, cfg)
    elif method == "accelerated_lowmem":
        res, trace = accelerated_rpcholesky_lowmem(oracle, cfg)
        err = float(np.clip(res.residual_trace() / res.trace_a, 0.0, 1.0))
        return err, trace.acceptance_rate, res.rank
    else:
        raise ValueError(f"unknown method {method!r}")
    return relative_trace_error(oracle, approx), trace.acceptance_rate, approx.rank


def _build_oracle(config: ExperimentConfig, data: DataMatrix, spec: KernelSpec):
    oracle = KernelOracle(data, spec, mode=config.distance_mode)
    if config.materialize and data.n_points <= config.dense_threshold:
        return DenseOracle(oracle.submatrix(None, None))
    return oracle


def run_experiment(config: ExperimentConfig, oracle=None) -> ExperimentReport:
    """Run every (method, rank, trial); failures are recorded per row.

    ``oracle`` overrides the one built from the dataset (used for instrumented
    oracles in tests).
    """
    data = generate_dataset(config.dataset)
    if config.bandwidth == "median":
        sigma = median_bandwidth(data, seed=config.seed)
    else:
        sigma = float(config.bandwidth)
    spec = KernelSpec(config.kernel, sigma)
    if oracle is None:
        oracle = _build_oracle(config, data, spec)

    jobs = [(m, k, t) for k in config.ranks for m in config.methods for t in range(config.trials)]

    if config.warmup:
        for m in config.methods:
            try:
                run_method(m, oracle, max(1, min(config.ranks) // 10), config.block_size, 12345)
            except NumericalError:
                pass

    def one(job):
        method, k, trial = job
        row = {"method": method, "rank": k, "trial": trial, "rel_trace_error": float("nan"),
               "wall_ms": float("nan"), "acceptance_rate": float("nan"), "accepted_rank": 0,
               "ratio_vs_simple": float("nan"), "error": ""}
        t0 = time.perf_counter()
        try:
            err, acc, got = run_method(method, oracle, k, config.block_size, _trial_seed(config.seed, trial))
        except (NumericalError, np.linalg.LinAlgError, ValueError) as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
            log.warning("%s rank=%d trial=%d failed: %s", method, k, trial, exc)
            return row
        row["wall_ms"] = 1e3 * (time.perf_counter() - t0)
        row.update(rel_trace_error=err, acceptance_rate=acc, accepted_rank=got)
        return row

    if config.threads > 1:
        with ThreadPoolExecutor(config.threads) as pool:
            rows = list(pool.map(one, jobs))
    else:
        rows = [one(j) for j in jobs]

    baseline = {(r["rank"], r["trial"]): r["rel_trace_error"]
                for r in rows if r["method"] == "simple" and not r["error"]}
    for r in rows:
        base = baseline.get((r["rank"], r["trial"]))
        if base is None or r["error"]:
            continue
        if base > 0:
            r["ratio_vs_simple"] = r["rel_trace_error"] / base
        elif r["rel_trace_error"] == 0:
            r["ratio_vs_simple"] = 1.0
        if r["rel_trace_error"] < 1e-13:
            log.info("%s rank=%d trial=%d: error below 1e-13", r["method"], r["rank"], r["trial"])
    return ExperimentReport(config, rows, sigma)


def write_rows_csv(path, rows, columns) -> None:
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=columns, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({c: (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                        for c, v in r.items()})


def write_report_csv(path, report: ExperimentReport) -> None:
    write_rows_csv(path, report.rows, REPORT_COLUMNS)


def plot_data_export(report: ExperimentReport, outdir) -> dict:
    """Write tidy CSVs for plotting: error vs rank, time by method, ratio by example."""
    if not report.rows:
        raise ValueError("empty report")
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = {
        "error_vs_rank": outdir / "error_vs_rank.csv",
        "time_vs_method": outdir / "time_vs_method.csv",
        "ratio_vs_example": outdir / "ratio_vs_example.csv",
    }
    write_rows_csv(paths["error_vs_rank"], report.rows, PLOT_COLUMNS)
    agg = report.aggregates()
    write_rows_csv(paths["time_vs_method"], agg, ["method", "rank", "runs", "mean_wall_ms", "std_wall_ms"])
    example = report.config.dataset.kind
    write_rows_csv(paths["ratio_vs_example"], [dict(a, example=example) for a in agg],
                   ["example", "method", "rank", "mean_error", "mean_ratio_vs_simple"])
    return paths


def bench_column_throughput(data: DataMatrix, kernel: KernelSpec, block_sizes, n_columns: int = 1000,
                            seed=0) -> list:
    """Columns generated per second for each block size and distance mode.

    For each b, ``ceil(n_columns / b)`` random column blocks of width b are
    generated.  The Gram trick is only measured for l2-distance kernels.
    """
    if any(b < 1 for b in block_sizes):
        raise ValueError("block sizes must be positive")
    rng = np.random.default_rng(seed)
    modes = [DistanceMode.DIRECT]
    if kernel.translation_invariant:
        modes.append(DistanceMode.GRAM_TRICK)
    rows = []
    n = data.n_points
    for b in block_sizes:
        reps = math.ceil(n_columns / b)
        blocks = [rng.integers(0, n, size=b) for _ in range(reps)]
        for mode in modes:
            oracle = KernelOracle(data, kernel, mode=mode)
            oracle.columns(blocks[0])  # untimed warmup
            t0 = time.perf_counter()
            for idx in blocks:
                oracle.columns(idx)
            dt = max(time.perf_counter() - t0, 1e-9)
            rows.append({"block_size": b, "mode": mode.value, "columns": reps * b,
                         "seconds": dt, "columns_per_second": reps * b / dt})
    return rows
