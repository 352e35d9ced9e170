"""Randomly pivoted QR for rectangular matrices.

Column-pivoted QR on ``B`` and pivoted partial Cholesky on ``B^T B`` build
the same approximation (``Bhat^T Bhat = Ahat``) when run with the same
pivots, so every pivoting rule for one has an analog for the other.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cholesky import NumericalError, PivotTrace, RoundRecord, RunConfig, _done, partial_cholesky
from .sampling import make_rng, rejection_sample_submatrix, sample_from_weights, zero_floor

__all__ = ["QrApprox", "rp_qr", "accelerated_rp_qr", "pivoted_qr", "qr_cholesky_crosscheck"]

# per-column dependence threshold inside the orthonormalization, relative to |B|_F
ORTH_TOL = 1e-12


@dataclass
class QrApprox:
    """``B ~ Q F^T`` with orthonormal Q (M x k) and F (N x k)."""

    q_factor: np.ndarray
    f_factor: np.ndarray
    pivots: np.ndarray

    @property
    def rank(self) -> int:
        return self.q_factor.shape[1]

    def dense(self) -> np.ndarray:
        return self.q_factor @ self.f_factor.T


def _as_matrix(B) -> np.ndarray:
    B = np.asarray(B, dtype=np.float64)
    if B.ndim != 2:
        raise ValueError("B must be a matrix")
    if not np.all(np.isfinite(B)):
        raise ValueError("B contains NaN or Inf")
    return B


def _sq_colnorms(B):
    return np.einsum("ij,ij->j", B, B)


def rp_qr(B, k: int, seed=None) -> QrApprox:
    """Sequential randomly pivoted QR with k pivots."""
    B = _as_matrix(B)
    M, N = B.shape
    if not 1 <= k <= min(M, N):
        raise ValueError(f"k must lie in [1, {min(M, N)}]")
    d = _sq_colnorms(B)
    if not d.sum() > 0:
        raise ValueError("B is zero")
    floor = zero_floor(d)
    rng = make_rng(seed)
    Q = np.zeros((M, k))
    F = np.zeros((N, k))
    pivots = []
    i = 0
    while i < k and d.sum() > 0:
        s = int(sample_from_weights(d, rng.random(1))[0])
        g = B[:, s] - Q[:, :i] @ F[s, :i]
        # reorthogonalize once; the single projection loses orthogonality
        g -= Q[:, :i] @ (Q[:, :i].T @ g)
        nrm = np.linalg.norm(g)
        if not nrm * nrm > floor:
            d[s] = 0.0
            continue
        Q[:, i] = g / nrm
        F[:, i] = B.T @ Q[:, i]
        d -= F[:, i] ** 2
        d[d <= floor] = 0.0
        pivots.append(s)
        i += 1
    return QrApprox(Q[:, :i], F[:, :i], np.asarray(pivots, dtype=np.intp))


def _orth(X, tol):
    """Householder QR of a panel; columns with ``|R_jj| <= tol`` are dropped."""
    if X.shape[1] == 0:
        return X, np.zeros(0, dtype=bool)
    Qx, R = np.linalg.qr(X, mode="reduced")
    keep = np.abs(np.diag(R)) > tol
    return Qx[:, keep], keep


def accelerated_rp_qr(B, config: RunConfig):
    """Accelerated randomly pivoted QR; returns ``(QrApprox, PivotTrace)``."""
    B = _as_matrix(B)
    M, N = B.shape
    u = _sq_colnorms(B)
    total = u.sum()
    if not total > 0:
        raise ValueError("B is zero")
    floor = zero_floor(u)
    tol = ORTH_TOL * np.sqrt(total)
    rng = make_rng(config.seed)
    b = config.block_size
    Q = np.zeros((M, 0))
    F = np.zeros((N, 0))
    pivots = []
    trace = PivotTrace(target_rank=config.rank)
    captured = 0.0
    rounds = 0
    while not _done(config, rounds, len(pivots), (total - captured) / total):
        if not u.sum() > 0:
            trace.rank_exhausted = True
            break
        proposed = sample_from_weights(u, rng.random(b))
        C = B[:, proposed] - Q @ F[proposed, :].T
        H = C.T @ C
        H = 0.5 * (H + H.T)
        accepted, _ = rejection_sample_submatrix(H, proposed, rng, floor)
        if len(accepted):
            Qp = B[:, accepted] - Q @ F[accepted, :].T
            Qp -= Q @ (Q.T @ Qp)
            Qp, keep = _orth(Qp, tol)
            if not keep.all():
                trace.dropped.extend(int(s) for s in accepted[~keep])
                accepted = accepted[keep]
            G = B.T @ Qp
            Q = np.hstack([Q, Qp])
            F = np.hstack([F, G])
            sq = np.einsum("ij,ij->i", G, G)
            captured += float(sq.sum())
            u -= sq
            u[u <= floor] = 0.0
            pivots.extend(int(s) for s in accepted)
        trace.rounds.append(RoundRecord(proposed, accepted, total - captured))
        rounds += 1
    return QrApprox(Q, F, np.asarray(pivots, dtype=np.intp)), trace


def pivoted_qr(B, pivots) -> QrApprox:
    """Deterministic column-pivoted QR with a prescribed pivot order."""
    B = _as_matrix(B)
    pivots = np.asarray(pivots, dtype=np.intp)
    if len(set(pivots.tolist())) != len(pivots):
        raise ValueError("pivots must be distinct")
    scale = np.linalg.norm(B)
    M = B.shape[0]
    Q = np.zeros((M, len(pivots)))
    for i, s in enumerate(pivots):
        g = B[:, s].copy()
        for _ in range(2):
            g -= Q[:, :i] @ (Q[:, :i].T @ g)
        nrm = np.linalg.norm(g)
        if not nrm > ORTH_TOL * scale:
            raise NumericalError(f"degenerate pivot {s}: residual column is zero")
        Q[:, i] = g / nrm
    return QrApprox(Q, B.T @ Q, pivots)


def qr_cholesky_crosscheck(B, pivots) -> float:
    """Max-abs entry of ``Bhat^T Bhat - Ahat`` for QR on B and Cholesky on ``B^T B``."""
    B = _as_matrix(B)
    qr = pivoted_qr(B, pivots)
    chol = partial_cholesky(B.T @ B, pivots)
    Bhat = qr.dense()
    return float(np.abs(Bhat.T @ Bhat - chol.dense()).max())
