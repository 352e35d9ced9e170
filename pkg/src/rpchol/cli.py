"""Command-line entry point.

Exit codes: 0 on success, 2 for configuration errors, 3 for numerical failure.
A ``--config`` file holds ``key = value`` lines that mirror the long flags
(``block = 60`` for ``--block 60``); flags given on the command line win.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import bounds as bd
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
from .experiment import METHODS, ExperimentConfig, bench_column_throughput, plot_data_export, \
    run_experiment, write_report_csv, write_rows_csv
from .fileio import read_points_csv, read_vector_csv, write_factor, write_model, write_pivot_trace, \
    write_points_csv
from .kernels import DataMatrix, KernelOracle, KernelSpec, median_bandwidth
from .krr import fit_krr
from .lowmem import accelerated_rpcholesky_lowmem

log = logging.getLogger("rpchol")


class ConfigError(ValueError):
    pass


def read_config(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _int_list(text):
    return [int(v) for v in str(text).split(",") if v.strip()]


def _str_list(text):
    return [v.strip() for v in str(text).split(",") if v.strip()]


def _kv(text):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    k, v = text.split("=", 1)
    try:
        v = float(v) if any(c in v for c in ".eE") else int(v)
    except ValueError:
        pass
    return k, v


def _global(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output path (stdout when omitted, where sensible)")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--config", default=None, help="key=value file mirroring the flags")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rpchol", description="Randomly pivoted Cholesky toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    parser.subcommands = sub.choices

    p = sub.add_parser("gen-data", help="generate a synthetic point set")
    _global(p)
    p.add_argument("--kind", default="smile", choices=["smile", "spiral", "outliers", "gaussian"])
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--param", type=_kv, action="append", default=[], help="generator option key=value")

    p = sub.add_parser("approx", help="low-rank approximation of a kernel matrix")
    _global(p)
    p.add_argument("--points", required=True)
    p.add_argument("--header", action="store_true")
    p.add_argument("--kernel", default="gaussian")
    p.add_argument("--sigma", default="auto")
    p.add_argument("--mode", default=None, choices=["direct", "gram"])
    p.add_argument("--method", default="accelerated", choices=METHODS)
    p.add_argument("--rank", type=int, default=None)
    p.add_argument("--rounds", type=int, default=None)
    p.add_argument("--block", type=int, default=20)
    p.add_argument("--trace", default=None, help="write the pivot trace CSV here")

    p = sub.add_parser("krr", help="kernel ridge regression with a Nystrom preconditioner")
    _global(p)
    p.add_argument("--train", required=True)
    p.add_argument("--targets", required=True)
    p.add_argument("--header", action="store_true")
    p.add_argument("--kernel", default="matern52")
    p.add_argument("--sigma", default="auto")
    p.add_argument("--mu", default="1e-9N")
    p.add_argument("--rank", type=int, default=200)
    p.add_argument("--block", type=int, default=100)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--max-iters", type=int, default=1000)

    p = sub.add_parser("bounds", help="evaluate sufficient-pivot bounds for a spectrum")
    _global(p)
    p.add_argument("--spectrum", required=True, help="CSV of eigenvalues")
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--block", type=int, default=1)
    p.add_argument("--drvw", action="store_true")
    p.add_argument("--trajectory", type=int, default=None)

    p = sub.add_parser("bench-columns", help="column generation throughput")
    _global(p)
    p.add_argument("--points", default=None)
    p.add_argument("--header", action="store_true")
    p.add_argument("--n", type=int, default=10000)
    p.add_argument("--dim", type=int, default=1000)
    p.add_argument("--kernel", default="gaussian")
    p.add_argument("--sigma", default="auto")
    p.add_argument("--blocks", type=_int_list, default=[1, 10, 100, 1000])
    p.add_argument("--columns", type=int, default=1000)

    p = sub.add_parser("experiment", help="compare methods on a dataset")
    _global(p)
    p.add_argument("--dataset", default="smile", choices=["smile", "spiral", "outliers", "gaussian", "file"])
    p.add_argument("--n", type=int, default=10000)
    p.add_argument("--param", type=_kv, action="append", default=[])
    p.add_argument("--kernel", default="gaussian")
    p.add_argument("--sigma", default="median")
    p.add_argument("--mode", default=None, choices=["direct", "gram"])
    p.add_argument("--methods", type=_str_list, default=["simple", "block", "accelerated"])
    p.add_argument("--ranks", type=_int_list, default=[300])
    p.add_argument("--block", type=int, default=60)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--plot-dir", default=None)
    return parser


def _config_path(argv):
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def _apply_config(parser, argv):
    """Parse ``argv`` with config-file values as defaults for the chosen subcommand."""
    argv = list(sys.argv[1:] if argv is None else argv)
    path = _config_path(argv)
    sub = parser.subcommands.get(argv[0]) if argv else None
    if path is None or sub is None:
        return parser.parse_args(argv)
    known = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, raw in read_config(path).items():
        if key not in known or key in ("config", "help"):
            raise ConfigError(f"unknown config key {key!r} for {argv[0]}")
        action = known[key]
        try:
            if action.nargs == 0:
                value = raw.lower() in ("1", "true", "yes", "on")
            elif isinstance(action, argparse._AppendAction):
                value = [action.type(v) for v in _str_list(raw)]
            else:
                value = action.type(raw) if action.type else raw
        except (TypeError, ValueError, argparse.ArgumentTypeError) as exc:
            raise ConfigError(f"config key {key}: {exc}") from None
        if action.choices is not None and value not in action.choices:
            raise ConfigError(f"config key {key}: {value!r} not in {list(action.choices)}")
        defaults[key] = value
        action.required = False
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def _sigma(text, data, seed):
    if str(text).lower() in ("auto", "median"):
        return median_bandwidth(data, seed=seed)
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"bad sigma {text!r}") from None


def _emit_rows(args, rows, columns):
    if args.out:
        write_rows_csv(args.out, rows, columns)
    else:
        w = csv.DictWriter(sys.stdout, fieldnames=columns, extrasaction="ignore")
        w.writeheader()
        w.writerows(rows)


def cmd_gen_data(args):
    X = generate_dataset(DatasetSpec(args.kind, args.n, args.seed, dict(args.param))).points
    write_points_csv(args.out or sys.stdout, X)


def cmd_approx(args):
    data = DataMatrix(read_points_csv(args.points, args.header))
    spec = KernelSpec(args.kernel, _sigma(args.sigma, data, args.seed))
    oracle = KernelOracle(data, spec, mode=args.mode)
    if (args.rank is None) == (args.rounds is None):
        raise ConfigError("give exactly one of --rank and --rounds")
    if args.method == "simple":
        if args.rank is None:
            raise ConfigError("simple RPCholesky takes --rank")
        approx, trace = simple_rpcholesky(oracle, args.rank, seed=args.seed)
    else:
        cfg = RunConfig(block_size=args.block, rounds=args.rounds, rank=args.rank, seed=args.seed)
        if args.method == "accelerated_lowmem":
            res, trace = accelerated_rpcholesky_lowmem(oracle, cfg)
            approx = res.to_approx(oracle)
        else:
            fn = {"block": block_rpcholesky, "accelerated": accelerated_rpcholesky, "rbrp": rbrp_cholesky}
            approx, trace = fn[args.method](oracle, cfg)
    err = relative_trace_error(oracle, approx)
    if args.out:
        write_factor(args.out, approx)
    if args.trace:
        write_pivot_trace(args.trace, trace)
    print(f"rank={approx.rank} rel_trace_error={err:.6e} acceptance_rate={trace.acceptance_rate:.4f} sigma={spec.bandwidth:.6g}")


def cmd_krr(args):
    data = DataMatrix(read_points_csv(args.train, args.header))
    y = read_vector_csv(args.targets, args.header)
    spec = KernelSpec(args.kernel, _sigma(args.sigma, data, args.seed))
    mu_text = str(args.mu)
    try:
        mu = float(mu_text[:-1]) * data.n_points if mu_text.endswith("N") else float(mu_text)
    except ValueError:
        raise ConfigError(f"bad mu {args.mu!r}") from None
    cfg = RunConfig(block_size=args.block, rank=args.rank, seed=args.seed) if args.rank > 0 else None
    model, report = fit_krr(data, y, spec, mu=mu, precond_rank=args.rank, config=cfg,
                            tol=args.tol, max_iters=args.max_iters)
    if args.out:
        write_model(args.out, model)
    print(f"iterations={report.iterations} converged={report.converged} "
          f"residual={report.final_true_residual:.3e} sigma={spec.bandwidth:.6g} mu={mu:.3e}")
    if not report.converged:
        raise NumericalError("PCG did not converge")


def cmd_bounds(args):
    lam = read_vector_csv(args.spectrum)
    q = bd.BoundQuery(args.r, args.eps, args.block, bd.Spectrum(lam))
    rec = bd.evaluate_bounds(q, drvw=args.drvw, trajectory=args.trajectory)
    traj = rec.pop("trajectory", None)
    rows = [dict(rec)]
    columns = list(rec)
    if traj is not None:
        columns = ["round", "alpha"]
        rows = [{"round": t, "alpha": a} for t, a in enumerate(traj)]
        summary = ", ".join(f"{k}={v}" for k, v in rec.items())
        print(f"# {summary}", file=sys.stderr)
    _emit_rows(args, rows, columns)


def cmd_bench_columns(args):
    if args.points:
        data = DataMatrix(read_points_csv(args.points, args.header))
    else:
        data = DataMatrix(np.random.default_rng(args.seed).standard_normal((args.n, args.dim)))
    spec = KernelSpec(args.kernel, _sigma(args.sigma, data, args.seed))
    rows = bench_column_throughput(data, spec, args.blocks, args.columns, seed=args.seed)
    _emit_rows(args, rows, ["block_size", "mode", "columns", "seconds", "columns_per_second"])


def cmd_experiment(args):
    sigma = args.sigma if str(args.sigma).lower() in ("median", "auto") else float(args.sigma)
    cfg = ExperimentConfig(
        DatasetSpec(args.dataset, args.n, args.seed, dict(args.param)),
        kernel=args.kernel, bandwidth="median" if isinstance(sigma, str) else sigma,
        methods=args.methods, ranks=args.ranks, block_size=args.block, trials=args.trials,
        seed=args.seed, distance_mode=args.mode, threads=args.threads,
    )
    report = run_experiment(cfg)
    if args.out:
        write_report_csv(args.out, report)
    if args.plot_dir:
        plot_data_export(report, args.plot_dir)
    for a in report.aggregates():
        print(f"{a['method']:>20s} k={a['rank']:<6d} error={a['mean_error']:.3e} "
              f"time={a['mean_wall_ms']:.1f}ms ratio={a['mean_ratio_vs_simple']:.3g}")
    if any(r["error"] for r in report.rows):
        print(f"{sum(bool(r['error']) for r in report.rows)} run(s) failed, see the CSV", file=sys.stderr)


COMMANDS = {
    "gen-data": cmd_gen_data,
    "approx": cmd_approx,
    "krr": cmd_krr,
    "bounds": cmd_bounds,
    "bench-columns": cmd_bench_columns,
    "experiment": cmd_experiment,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, ValueError, OSError, bd.OutOfScope) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
