import csv

import numpy as np
import pytest

from rpchol.cli import ConfigError, main, read_config
from rpchol.fileio import read_factor, read_model, read_points_csv, write_points_csv


@pytest.fixture
def points(tmp_path):
    p = tmp_path / "pts.csv"
    assert main(["gen-data", "--kind", "gaussian", "--n", "120", "--param", "dim=2", "--seed", "3",
                 "--out", str(p)]) == 0
    return p


def test_gen_data(points):
    X = read_points_csv(points)
    assert X.shape == (120, 2)


def test_approx_writes_factor_and_trace(tmp_path, points, capsys):
    out, trace = tmp_path / "f.rpcf", tmp_path / "t.csv"
    code = main(["approx", "--points", str(points), "--sigma", "1.0", "--method", "accelerated",
                 "--rank", "10", "--block", "4", "--out", str(out), "--trace", str(trace)])
    assert code == 0
    assert "rel_trace_error=" in capsys.readouterr().out
    assert read_factor(out).rank >= 10
    assert next(csv.reader(open(trace))) == ["round", "proposed", "accepted", "acceptance_rate"]


@pytest.mark.parametrize("method", ["simple", "block", "accelerated_lowmem", "rbrp"])
def test_approx_methods(points, method):
    assert main(["approx", "--points", str(points), "--method", method, "--rank", "8"]) == 0


def test_approx_needs_rank_or_rounds(points):
    assert main(["approx", "--points", str(points)]) == 2
    assert main(["approx", "--points", str(points), "--rank", "3", "--rounds", "2"]) == 2


def test_krr(tmp_path, points, capsys):
    X = read_points_csv(points)
    y = tmp_path / "y.csv"
    np.savetxt(y, np.sin(X[:, 0]))
    model = tmp_path / "m.rpcf"
    code = main(["krr", "--train", str(points), "--targets", str(y), "--kernel", "gaussian", "--sigma", "1",
                 "--rank", "20", "--block", "5", "--out", str(model)])
    assert code == 0
    assert "converged=True" in capsys.readouterr().out
    m = read_model(model, X)
    assert m.regularization == pytest.approx(120e-9)
    assert main(["krr", "--train", str(points), "--targets", str(y), "--mu", "oops"]) == 2


def test_krr_nonconvergence_exit_code(tmp_path, points):
    y = tmp_path / "y.csv"
    np.savetxt(y, np.random.default_rng(0).standard_normal(120))
    code = main(["krr", "--train", str(points), "--targets", str(y), "--rank", "0", "--mu", "1e-12",
                 "--tol", "1e-14", "--max-iters", "2"])
    assert code == 3


def test_block_numerical_failure_exit_code(tmp_path):
    # tightly clustered points break the block Cholesky under the Gram trick
    p = tmp_path / "pts.csv"
    assert main(["gen-data", "--kind", "smile", "--n", "10000", "--out", str(p)]) == 0
    code = main(["approx", "--points", str(p), "--sigma", "0.2", "--method", "block", "--mode", "gram",
                 "--rank", "300", "--block", "60"])
    assert code == 3


def test_bounds(tmp_path, capsys):
    s = tmp_path / "s.csv"
    np.savetxt(s, [0.5, 0.5, 0.05, 0.05])
    assert main(["bounds", "--spectrum", str(s), "--r", "2", "--eps", "0.5", "--block", "4"]) == 0
    rows = list(csv.DictReader(capsys.readouterr().out.splitlines()))
    assert float(rows[0]["simple_pivots"]) == pytest.approx(9.991, abs=1e-3)
    assert main(["bounds", "--spectrum", str(s), "--r", "2", "--eps", "0.5", "--trajectory", "3"]) == 0
    assert len(capsys.readouterr().out.strip().splitlines()) == 1 + 4
    # outside the scope of the DRVW bound
    assert main(["bounds", "--spectrum", str(s), "--r", "2", "--eps", "0.5", "--drvw"]) == 2


def test_bench_columns(tmp_path):
    out = tmp_path / "b.csv"
    assert main(["bench-columns", "--n", "200", "--dim", "10", "--blocks", "1,50", "--columns", "20",
                 "--out", str(out)]) == 0
    rows = list(csv.DictReader(open(out)))
    assert len(rows) == 4


def test_experiment(tmp_path, capsys):
    out = tmp_path / "e.csv"
    code = main(["experiment", "--dataset", "gaussian", "--n", "150", "--ranks", "10,20",
                 "--methods", "simple,accelerated", "--block", "5", "--trials", "2", "--out", str(out),
                 "--plot-dir", str(tmp_path / "plots"), "--threads", "2"])
    assert code == 0
    assert len(list(csv.DictReader(open(out)))) == 8
    assert (tmp_path / "plots" / "error_vs_rank.csv").exists()


def test_config_file(tmp_path, points):
    cfg = tmp_path / "run.cfg"
    out = tmp_path / "f.rpcf"
    cfg.write_text(f"# approximation settings\npoints = {points}\nrank = 6\nblock = 3\n"
                   f"method = rbrp\nout = {out}\n")
    assert main(["approx", "--config", str(cfg)]) == 0
    assert read_factor(out).rank >= 6
    # command-line flags win over the file
    assert main(["approx", "--config", str(cfg), "--rank", "9"]) == 0
    assert read_factor(out).rank >= 9


def test_config_errors(tmp_path, points):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("bogus = 1\n")
    assert main(["approx", "--config", str(cfg), "--points", str(points), "--rank", "2"]) == 2
    cfg.write_text("method = nonsense\n")
    assert main(["approx", "--config", str(cfg), "--points", str(points), "--rank", "2"]) == 2
    cfg.write_text("no equals sign\n")
    with pytest.raises(ConfigError):
        read_config(cfg)
    assert main(["approx", "--config", str(tmp_path / "missing.cfg"), "--points", str(points)]) == 2


def test_bad_arguments_exit_code(points):
    assert main(["approx", "--points", str(points), "--method", "nope", "--rank", "2"]) == 2
    assert main([]) == 2
    assert main(["approx", "--points", "/no/such/file.csv", "--rank", "2"]) == 2
