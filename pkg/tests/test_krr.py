import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_psd
from rpchol.cholesky import RunConfig
from rpchol.datasets import smile
from rpchol.kernels import DataMatrix, KernelOracle, KernelSpec
from rpchol.krr import (
    KernelMatvec,
    KrrModel,
    build_preconditioner,
    fit_krr,
    inverse_distance_features,
    mean_absolute_error,
    pcg_solve,
    predict,
    standardize_features,
)


def test_preconditioner_empty_factor():
    P = build_preconditioner(np.zeros((5, 0)), 2.0)
    v = np.arange(5.0)
    np.testing.assert_allclose(P.apply_inverse(v), v / 2.0)
    np.testing.assert_array_equal(P.apply_inverse(np.zeros(5)), np.zeros(5))


def test_preconditioner_matches_dense_inverse(rng):
    F = rng.standard_normal((10, 3))
    P = build_preconditioner(F, 0.5)
    v = rng.standard_normal(10)
    dense = np.linalg.solve(F @ F.T + 0.5 * np.eye(10), v)
    np.testing.assert_allclose(P.apply_inverse(v), dense, rtol=1e-9)


def test_preconditioner_errors():
    with pytest.raises(ValueError):
        build_preconditioner(np.ones((3, 1)), 0.0)
    with pytest.raises(ValueError):
        build_preconditioner(np.array([[1.0], [np.nan]]), 1.0)


@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 30), st.integers(0, 8), st.floats(1e-4, 1e2))
def test_woodbury_roundtrip(seed, n, k, mu):
    r = np.random.default_rng(seed)
    P = build_preconditioner(r.standard_normal((n, k)), mu)
    v = r.standard_normal(n)
    back = P.apply(P.apply_inverse(v))
    assert np.linalg.norm(back - v) <= 1e-8 * np.linalg.norm(v)


def test_exact_preconditioner_two_iterations(rng):
    G = rng.standard_normal((16, 16))
    A = G @ G.T
    mu = 1e-3
    F = np.linalg.cholesky(A)
    _, rep = pcg_solve(lambda v: A @ v + mu * v, build_preconditioner(F, mu), rng.standard_normal(16), tol=1e-10)
    assert rep.converged and rep.iterations <= 2


def test_identity_system_one_iteration(rng):
    y = rng.standard_normal(7)
    beta, rep = pcg_solve(lambda v: 1.0 * v, None, y)
    np.testing.assert_allclose(beta, y)
    assert rep.iterations == 1


def test_finite_termination_distinct_eigenvalues():
    d = np.array([1.0, 1.0, 1.0, 3.0, 3.0, 7.0, 7.0, 7.0])
    y = np.arange(1.0, 9.0)
    beta, rep = pcg_solve(lambda v: d * v, build_preconditioner(np.zeros((8, 0)), 1.0), y, tol=1e-12)
    assert rep.converged and rep.iterations <= 3
    np.testing.assert_allclose(beta, y / d)


def test_pcg_reports_both_residuals(rng):
    A = random_psd(rng, 20, decay=1.0)
    mu = 0.1
    y = rng.standard_normal(20)
    beta, rep = pcg_solve(lambda v: A @ v + mu * v, None, y, tol=1e-8, mu=mu)
    assert len(rep.relative_residuals) == len(rep.unregularized_residuals) == rep.iterations
    assert rep.relative_residuals[-1] < 1e-8
    assert rep.unregularized_residuals[-1] == pytest.approx(np.linalg.norm(A @ beta - y) / np.linalg.norm(y), rel=1e-5)
    assert rep.final_true_residual < 1e-7


def test_pcg_nonconvergence_returns_best(rng):
    A = random_psd(rng, 40, decay=3.0)
    y = rng.standard_normal(40)
    beta, rep = pcg_solve(lambda v: A @ v + 1e-12 * v, None, y, tol=1e-14, max_iters=3)
    assert not rep.converged and rep.iterations == 3
    assert rep.final_true_residual <= min(rep.relative_residuals) * (1 + 1e-6)


def test_pcg_argument_errors():
    with pytest.raises(ValueError):
        pcg_solve(lambda v: v, None, np.zeros(3))
    with pytest.raises(ValueError):
        pcg_solve(lambda v: v, None, np.ones(3), tol=0.0)


def test_blocked_matvec_matches_dense(rng):
    data = DataMatrix(rng.standard_normal((300, 3)))
    oracle = KernelOracle(data, KernelSpec("matern52", 1.0))
    v = rng.standard_normal(300)
    dense = oracle.submatrix(None, None) @ v + 0.3 * v
    blocked = KernelMatvec(oracle, 0.3, block_rows=37, dense_limit=0)
    assert blocked._dense is None
    assert np.linalg.norm(blocked(v) - dense) <= 1e-9 * np.linalg.norm(dense)


def test_fit_interpolates(rng):
    X = rng.uniform(-1, 1, size=(50, 2))
    y = np.sin(3 * X[:, 0]) + X[:, 1] ** 2
    model, rep = fit_krr(X, y, KernelSpec("gaussian", 0.5), mu=1e-12 * 50, precond_rank=50,
                         config=RunConfig(block_size=10, rank=50, seed=0), tol=1e-12, max_iters=500)
    assert rep.converged
    assert np.max(np.abs(predict(model, X) - y)) <= 1e-4 * y.std()


def test_fit_constant_targets(rng):
    X = rng.standard_normal((20, 2))
    model, rep = fit_krr(X, np.full(20, 4.5), KernelSpec("gaussian", 1.0))
    np.testing.assert_array_equal(model.coefficients, np.zeros(20))
    np.testing.assert_allclose(predict(model, rng.standard_normal((5, 2))), 4.5)
    assert rep.converged


def test_fit_defaults_and_errors(rng):
    X = rng.standard_normal((30, 2))
    model, _ = fit_krr(X, rng.standard_normal(30), KernelSpec("gaussian", 1.0), precond_rank=5)
    assert model.regularization == pytest.approx(30e-9)
    assert model.preconditioner_factor.shape[0] == 30
    with pytest.raises(ValueError):
        fit_krr(X, np.ones(29), KernelSpec("gaussian", 1.0))


def test_predict_examples():
    data = DataMatrix(np.array([[0.5, -1.0]]))
    model = KrrModel(data, KernelSpec("gaussian", 1.0), 1e-9, np.array([1.0]), 2.0)
    assert predict(model, [[0.5, -1.0]])[0] == pytest.approx(3.0)
    zero = KrrModel(data, KernelSpec("gaussian", 1.0), 1e-9, np.array([0.0]), 2.0)
    np.testing.assert_array_equal(predict(zero, np.ones((4, 2))), np.full(4, 2.0))
    with pytest.raises(ValueError):
        predict(model, np.ones((2, 3)))


def test_preconditioning_reduces_iterations():
    X = smile(2000, seed=0)
    y = np.sin(X[:, 0] / 3) + np.cos(X[:, 1] / 2)
    k = KernelSpec("gaussian", 0.2)
    _, plain = fit_krr(X, y, k, tol=1e-3)
    _, pre = fit_krr(X, y, k, precond_rank=200, config=RunConfig(block_size=50, rank=200, seed=0), tol=1e-3)
    assert pre.converged and plain.converged
    assert pre.iterations < plain.iterations


def test_mean_absolute_error():
    a = np.array([1.0, -2.0, 3.5])
    assert mean_absolute_error(a, a) == 0.0
    assert mean_absolute_error(a + 1, a) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        mean_absolute_error([], [])
    with pytest.raises(ValueError):
        mean_absolute_error([1.0], [1.0, 2.0])


def test_inverse_distance_features():
    np.testing.assert_allclose(inverse_distance_features([[0, 0, 0], [2, 0, 0]]), [0.5])
    tri = [[0, 0, 0], [1, 0, 0], [0.5, np.sqrt(3) / 2, 0]]
    np.testing.assert_allclose(inverse_distance_features(tri), [1, 1, 1])
    frames = np.random.default_rng(0).standard_normal((4, 9, 3))
    assert inverse_distance_features(frames).shape == (4, 36)
    # lexicographic pair order: (0,1), (0,2), (1,2)
    f = inverse_distance_features([[0, 0, 0], [1, 0, 0], [3, 0, 0]])
    np.testing.assert_allclose(f, [1, 1 / 3, 1 / 2])
    with pytest.raises(ValueError, match="singular feature"):
        inverse_distance_features([[1, 1, 1], [1, 1, 1]])
    with pytest.raises(ValueError):
        inverse_distance_features([[0, 0, 0]])


def test_standardize_features():
    X = np.array([[1.0, 5.0, 2.0], [3.0, 5.0, 4.0], [5.0, 5.0, 9.0]])
    with pytest.warns(UserWarning, match="zero-variance"):
        Z, mean, std, kept = standardize_features(X)
    np.testing.assert_array_equal(kept, [True, False, True])
    assert Z.shape == (3, 2)
    np.testing.assert_allclose(Z.mean(axis=0), 0, atol=1e-15)
    np.testing.assert_allclose(Z.std(axis=0), 1)
