import numpy as np
import pytest
from hypothesis import given, strategies as st

from rpchol.cholesky import NumericalError, RunConfig, accelerated_rpcholesky
from rpchol.qr import accelerated_rp_qr, pivoted_qr, qr_cholesky_crosscheck, rp_qr


def test_rank_one_single_pivot(rng):
    B = np.outer(rng.standard_normal(8), rng.standard_normal(6))
    approx = rp_qr(B, 3, seed=0)
    assert approx.rank == 1
    np.testing.assert_allclose(approx.dense(), B, atol=1e-12 * np.abs(B).max())


def test_rp_qr_square_full_rank(rng):
    B = rng.standard_normal((7, 7))
    approx = rp_qr(B, 7, seed=1)
    np.testing.assert_allclose(approx.dense(), B, atol=1e-10)
    np.testing.assert_allclose(approx.q_factor.T @ approx.q_factor, np.eye(7), atol=1e-12)


def test_rp_qr_argument_errors(rng):
    with pytest.raises(ValueError):
        rp_qr(rng.standard_normal((4, 3)), 4)
    with pytest.raises(ValueError):
        rp_qr(np.zeros((3, 3)), 1)


def test_accelerated_orthonormal(rng):
    B = rng.standard_normal((30, 20)) @ np.diag(0.7 ** np.arange(20))
    approx, trace = accelerated_rp_qr(B, RunConfig(block_size=4, rank=10, seed=3))
    Q = approx.q_factor
    np.testing.assert_allclose(Q.T @ Q, np.eye(approx.rank), atol=1e-12)
    assert approx.rank >= 10
    np.testing.assert_allclose(approx.f_factor, B.T @ Q, atol=1e-12)


def test_accelerated_qr_matches_cholesky_on_gram(rng):
    # the same pivot stream drives QR on B and Cholesky on B^T B
    B = rng.standard_normal((25, 15))
    cfg = RunConfig(block_size=3, rank=6, seed=5)
    qr, _ = accelerated_rp_qr(B, cfg)
    ch, _ = accelerated_rpcholesky(B.T @ B, cfg)
    np.testing.assert_array_equal(qr.pivots, ch.pivots)
    Bhat = qr.dense()
    np.testing.assert_allclose(Bhat.T @ Bhat, ch.dense(), atol=1e-9 * np.trace(B.T @ B))


def test_dependent_columns_dropped():
    B = np.zeros((5, 4))
    B[:, 0] = [1, 2, 3, 4, 5]
    B[:, 1] = B[:, 0]
    B[:, 2] = [0, 1, 0, 1, 0]
    approx, trace = accelerated_rp_qr(B, RunConfig(block_size=8, rounds=3, seed=0))
    assert approx.rank == 2
    np.testing.assert_allclose(approx.dense(), B, atol=1e-12)


def test_pivoted_qr_degenerate_pivot():
    B = np.array([[1.0, 2.0], [1.0, 2.0]])
    with pytest.raises(NumericalError):
        pivoted_qr(B, [0, 1])
    with pytest.raises(ValueError):
        pivoted_qr(B, [0, 0])


@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 12))
def test_crosscheck_property(seed, k):
    r = np.random.default_rng(seed)
    B = r.standard_normal((16, 12))
    piv = r.permutation(12)[:k]
    assert qr_cholesky_crosscheck(B, piv) <= 1e-10 * np.trace(B.T @ B)
