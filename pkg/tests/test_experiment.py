import csv

import numpy as np
import pytest

import rpchol.experiment as experiment
from rpchol.cholesky import NumericalError
from rpchol.datasets import DatasetSpec
from rpchol.experiment import (
    PLOT_COLUMNS,
    REPORT_COLUMNS,
    ExperimentConfig,
    bench_column_throughput,
    plot_data_export,
    run_experiment,
    write_report_csv,
)
from rpchol.kernels import DataMatrix, KernelOracle, KernelSpec


def small_config(**kw):
    base = dict(dataset=DatasetSpec("gaussian", 200, seed=1, params={"dim": 3}), bandwidth=1.0,
                methods=["simple"], ranks=[20], block_size=5, trials=3, seed=4, warmup=False)
    base.update(kw)
    return ExperimentConfig(**base)


def header(path):
    with open(path, newline="") as f:
        return next(csv.reader(f))


def test_simple_only_self_ratio(tmp_path):
    rep = run_experiment(small_config())
    assert len(rep.rows) == 3
    assert all(r["ratio_vs_simple"] == 1.0 for r in rep.rows)
    p = tmp_path / "r.csv"
    write_report_csv(p, rep)
    rows = list(csv.DictReader(open(p)))
    assert len(rows) == 3 and all(float(r["ratio_vs_simple"]) == 1.0 for r in rows)


def test_csv_headers_golden(tmp_path):
    rep = run_experiment(small_config(methods=["simple", "accelerated"], ranks=[4, 8, 12, 16, 20], trials=1))
    p = tmp_path / "r.csv"
    write_report_csv(p, rep)
    assert header(p) == ["method", "rank", "trial", "rel_trace_error", "wall_ms", "acceptance_rate",
                         "accepted_rank", "ratio_vs_simple", "error"]
    paths = plot_data_export(rep, tmp_path / "plots")
    assert header(paths["error_vs_rank"]) == ["method", "rank", "trial", "rel_trace_error", "wall_ms",
                                              "acceptance_rate"]
    assert header(paths["time_vs_method"]) == ["method", "rank", "runs", "mean_wall_ms", "std_wall_ms"]
    assert header(paths["ratio_vs_example"]) == ["example", "method", "rank", "mean_error",
                                                 "mean_ratio_vs_simple"]
    with open(paths["error_vs_rank"]) as f:
        assert sum(1 for _ in f) == 1 + 10
    assert PLOT_COLUMNS == REPORT_COLUMNS[:6]


def test_rows_valid_and_all_methods():
    rep = run_experiment(small_config(methods=list(experiment.METHODS), trials=2, warmup=True))
    assert len(rep.rows) == 10
    for r in rep.rows:
        assert not r["error"], r
        assert 0.0 <= r["rel_trace_error"] <= 1.0
        assert r["wall_ms"] > 0
        assert r["accepted_rank"] >= 20
    agg = rep.aggregates()
    assert {a["method"] for a in agg} == set(experiment.METHODS)


def test_determinism():
    cfg = small_config(methods=["simple", "block", "accelerated", "rbrp"], trials=2)
    a, b = run_experiment(cfg), run_experiment(cfg)
    for ra, rb in zip(a.rows, b.rows):
        assert ra["rel_trace_error"] == rb["rel_trace_error"]
        assert ra["accepted_rank"] == rb["accepted_rank"]


def test_threads_match_serial():
    cfg = small_config(methods=["simple", "accelerated"], trials=4)
    serial = run_experiment(cfg)
    threaded = run_experiment(small_config(methods=["simple", "accelerated"], trials=4, threads=3))
    assert [r["rel_trace_error"] for r in serial.rows] == [r["rel_trace_error"] for r in threaded.rows]


def test_config_validation():
    with pytest.raises(ValueError):
        small_config(methods=[])
    with pytest.raises(ValueError):
        small_config(methods=["magic"])
    with pytest.raises(ValueError):
        small_config(ranks=[500])


def test_failure_recorded_per_row(monkeypatch):
    def broken(*a, **k):
        raise NumericalError("forced")

    monkeypatch.setattr(experiment, "block_rpcholesky", broken)
    rep = run_experiment(small_config(methods=["simple", "block"], trials=2))
    assert len(rep.rows) == 4
    bad = [r for r in rep.rows if r["method"] == "block"]
    assert all("forced" in r["error"] for r in bad)
    assert all(not r["error"] for r in rep.rows if r["method"] == "simple")


class CountingOracle(KernelOracle):
    calls = []

    def submatrix(self, rows, cols):
        n = self.dimension()
        nr = n if rows is None else len(np.atleast_1d(rows))
        nc = n if cols is None else len(np.atleast_1d(cols))
        CountingOracle.calls.append((nr, nc))
        return super().submatrix(rows, cols)


def test_never_materializes_above_threshold(monkeypatch):
    CountingOracle.calls = []
    monkeypatch.setattr(experiment, "KernelOracle", CountingOracle)
    cfg = small_config(methods=list(experiment.METHODS), trials=1, materialize=True, dense_threshold=100)
    rep = run_experiment(cfg)
    assert not any(r["error"] for r in rep.rows)
    assert CountingOracle.calls
    assert all(nr * nc < 200 * 200 for nr, nc in CountingOracle.calls)
    # below the threshold the same config is allowed to cache the matrix
    CountingOracle.calls = []
    run_experiment(small_config(materialize=True, dense_threshold=1000))
    assert (200, 200) in CountingOracle.calls


def test_bench_columns():
    data = DataMatrix(np.random.default_rng(0).standard_normal((300, 5)))
    rows = bench_column_throughput(data, KernelSpec("gaussian", 1.0), [1, 10, 100], n_columns=50)
    assert [(r["block_size"], r["mode"]) for r in rows] == [
        (1, "direct"), (1, "gram"), (10, "direct"), (10, "gram"), (100, "direct"), (100, "gram")]
    assert all(r["seconds"] > 0 and r["columns_per_second"] > 0 for r in rows)
    lap = bench_column_throughput(data, KernelSpec("l1laplace", 1.0), [4], n_columns=8)
    assert [r["mode"] for r in lap] == ["direct"]
    with pytest.raises(ValueError):
        bench_column_throughput(data, KernelSpec("gaussian", 1.0), [0])


def test_median_bandwidth_default():
    rep = run_experiment(small_config(bandwidth="median", trials=1))
    assert rep.bandwidth > 0
