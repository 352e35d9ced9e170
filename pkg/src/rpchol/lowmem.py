"""Accelerated RPCholesky in O(N + k^2) memory.

Only the pivots and the Cholesky factor of ``A[S, S]`` are kept; columns of
``A`` are regenerated whenever they are needed.  Driven by the same seed, the
pivot sequence and accept/reject decisions match
:func:`rpchol.cholesky.accelerated_rpcholesky`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .cholesky import PivotTrace, RoundRecord, RunConfig, LowRankApprox, _as_oracle, _done
from .sampling import make_rng, rejection_sample_submatrix, sample_from_weights, zero_floor

__all__ = ["LowMemResult", "accelerated_rpcholesky_lowmem"]


@dataclass
class LowMemResult:
    pivots: np.ndarray
    chol_factor: np.ndarray
    residual_diag: np.ndarray
    trace_a: float

    @property
    def rank(self) -> int:
        return len(self.pivots)

    def factor(self, A) -> np.ndarray:
        """Materialize ``F = A[:, S] L^{-T}``, so that ``F F^T`` is the approximation."""
        oracle = _as_oracle(A)
        if not self.rank:
            return np.zeros((oracle.dimension(), 0))
        C = oracle.columns(self.pivots)
        return sla.solve_triangular(self.chol_factor, C.T, lower=True).T

    def to_approx(self, A) -> LowRankApprox:
        F = np.asfortranarray(self.factor(A))
        return LowRankApprox(F, self.pivots.copy(), self.chol_factor.copy(), self.residual_diag.copy())

    def residual_trace(self) -> float:
        """Sum of the tracked residual diagonal (clamped at zero)."""
        return float(self.residual_diag.sum())


class _ImplicitFactor:
    """Applies ``A[R, S] L^{-T} L^{-1}`` without storing ``A[:, S]``."""

    def __init__(self):
        self.L = np.zeros((0, 0))
        self.S = np.zeros(0, dtype=np.intp)

    def whiten(self, B):
        """``L^{-1} B`` for a k-row block B."""
        return sla.solve_triangular(self.L, B, lower=True, check_finite=False)

    def project(self, B):
        """``L^{-T} L^{-1} B``, i.e. ``A[S, S]^{-1} B``."""
        return sla.solve_triangular(self.L, self.whiten(B), lower=True, trans="T",
                                    check_finite=False)


def accelerated_rpcholesky_lowmem(A, config: RunConfig, chunk: int | None = None):
    """Low-memory accelerated RPCholesky.

    ``chunk`` is the row-block size of the diagonal update (defaults to
    ``max(b, 1024)``); it bounds the working memory at ``chunk * k`` and
    does not change the result.  Returns ``(LowMemResult, PivotTrace)``.
    """
    oracle = _as_oracle(A)
    n = oracle.dimension()
    rng = make_rng(config.seed)
    b = config.block_size
    chunk = max(b, 1024) if chunk is None else int(chunk)
    diag = oracle.diag()
    trace_a = float(diag.sum())
    if not trace_a > 0:
        raise ValueError("matrix has zero trace")
    floor = zero_floor(diag)
    u = diag.copy()
    imp = _ImplicitFactor()
    trace = PivotTrace(target_rank=config.rank)

    captured = 0.0
    rounds = 0
    while not _done(config, rounds, len(imp.S), (trace_a - captured) / trace_a):
        if not u.sum() > 0:
            trace.rank_exhausted = True
            break
        proposed = sample_from_weights(u, rng.random(b))
        S = imp.S
        H = oracle.submatrix(proposed, proposed)
        if len(S):
            W = imp.whiten(oracle.submatrix(S, proposed))
            H = H - W.T @ W
        H = 0.5 * (H + H.T)
        accepted, Li = rejection_sample_submatrix(H, proposed, rng, floor)
        m = len(accepted)
        if m:
            # coefficients mapping old-pivot columns onto the new residual columns
            M = imp.project(oracle.submatrix(S, accepted)) if len(S) else None
            for start in range(0, n, chunk):
                R = np.arange(start, min(start + chunk, n))
                C = oracle.submatrix(R, accepted)
                if M is not None:
                    C -= oracle.submatrix(R, S) @ M
                G = sla.solve_triangular(Li, C.T, lower=True, check_finite=False).T
                sq = np.einsum("ij,ij->i", G, G)
                captured += float(sq.sum())
                u[R] -= sq
            k = len(S)
            L = np.zeros((k + m, k + m))
            L[:k, :k] = imp.L
            if k:
                L[k:, :k] = imp.whiten(oracle.submatrix(S, accepted)).T
            L[k:, k:] = Li
            imp.L = L
            imp.S = np.concatenate([S, accepted])
            u[u <= floor] = 0.0
        trace.rounds.append(RoundRecord(proposed, accepted, trace_a - captured))
        rounds += 1
    result = LowMemResult(imp.S.copy(), imp.L.copy(), u.copy(), trace_a)
    return result, trace
