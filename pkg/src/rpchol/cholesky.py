"""Randomly pivoted partial Cholesky: simple, block, accelerated and RBRP variants.

Every routine returns a :class:`LowRankApprox` ``A ~ F F^T`` together with a
:class:`PivotTrace` describing what each round proposed and accepted.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .kernels import PsdOracle, DenseOracle
from .sampling import EPS, make_rng, rejection_sample_submatrix, sample_from_weights, zero_floor

__all__ = [
    "NumericalError",
    "RunConfig",
    "RoundRecord",
    "PivotTrace",
    "LowRankApprox",
    "simple_rpcholesky",
    "block_rpcholesky",
    "accelerated_rpcholesky",
    "rbrp_cholesky",
    "relative_trace_error",
    "partial_cholesky",
]


class NumericalError(RuntimeError):
    """A factorization broke down beyond what the safeguards can repair."""


@dataclass(frozen=True)
class RunConfig:
    """Block size plus a stopping rule: a fixed number of rounds or a target rank."""

    block_size: int = 1
    rounds: int | None = None
    rank: int | None = None
    seed: object = None
    stop_tol: float = 0.0

    def __post_init__(self):
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")
        if (self.rounds is None) == (self.rank is None):
            raise ValueError("give exactly one of rounds= or rank=")
        if self.rounds is not None and self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.rank is not None and self.rank < 1:
            raise ValueError("rank must be >= 1")
        if self.stop_tol < 0:
            raise ValueError("stop_tol must be nonnegative")


@dataclass
class RoundRecord:
    proposed: np.ndarray
    accepted: np.ndarray
    residual_trace: float

    @property
    def acceptance_count(self) -> int:
        return len(self.accepted)

    @property
    def acceptance_rate(self) -> float:
        return len(self.accepted) / len(self.proposed) if len(self.proposed) else 0.0


@dataclass
class PivotTrace:
    rounds: list = field(default_factory=list)
    rank_exhausted: bool = False
    target_rank: int | None = None
    shifted_rounds: list = field(default_factory=list)
    dropped: list = field(default_factory=list)

    @property
    def n_proposed(self) -> int:
        return sum(len(r.proposed) for r in self.rounds)

    @property
    def n_accepted(self) -> int:
        return sum(len(r.accepted) for r in self.rounds)

    @property
    def acceptance_rate(self) -> float:
        n = self.n_proposed
        return self.n_accepted / n if n else 0.0

    @property
    def surplus(self) -> int:
        """Pivots accepted beyond the target rank in the last round."""
        if self.target_rank is None:
            return 0
        return max(0, self.n_accepted - self.target_rank)


@dataclass
class LowRankApprox:
    """``A ~ F F^T`` with pivots ``S`` and ``A[S, S] = L L^T``."""

    factor: np.ndarray
    pivots: np.ndarray
    chol_factor: np.ndarray | None = None
    residual_diag: np.ndarray | None = None

    @property
    def rank(self) -> int:
        return self.factor.shape[1]

    @property
    def n(self) -> int:
        return self.factor.shape[0]

    def approx_trace(self) -> float:
        return float(np.einsum("ij,ij->", self.factor, self.factor))

    def dense(self) -> np.ndarray:
        return self.factor @ self.factor.T


def _as_oracle(A) -> PsdOracle:
    return A if isinstance(A, PsdOracle) else DenseOracle(A)


class _Factorization:
    """Growing factor F, residual diagonal u and running trace bookkeeping."""

    def __init__(self, oracle: PsdOracle, capacity: int):
        self.oracle = oracle
        self.n = oracle.dimension()
        self.diag = oracle.diag()
        self.trace_a = float(self.diag.sum())
        if not self.trace_a > 0:
            raise ValueError("matrix has zero trace")
        self.floor = zero_floor(self.diag)
        self.u = self.diag.copy()
        self.F = np.zeros((self.n, max(1, capacity)), order="F")
        self.k = 0
        self.pivots = []
        self.captured = 0.0

    @property
    def residual_trace(self) -> float:
        return self.trace_a - self.captured

    def exhausted(self) -> bool:
        return not self.u.sum() > 0

    def propose(self, uniforms):
        return sample_from_weights(self.u, uniforms)

    def residual_block(self, idx):
        """Residual ``A[idx, idx] - F[idx] F[idx]^T``, symmetrized."""
        Fi = self.F[idx, :self.k]
        H = self.oracle.submatrix(idx, idx) - Fi @ Fi.T
        return 0.5 * (H + H.T)

    def residual_columns(self, idx):
        C = self.oracle.columns(idx)
        if self.k:
            C -= self.F[:, :self.k] @ self.F[idx, :self.k].T
        return C

    def extend(self, idx, C, L):
        """Append ``G = C L^{-T}`` where C holds residual columns at ``idx``."""
        m = len(idx)
        if m == 0:
            return
        G = sla.solve_triangular(L, C.T, lower=True, check_finite=False).T
        if self.k + m > self.F.shape[1]:
            grown = np.zeros((self.n, max(2 * self.F.shape[1], self.k + m)), order="F")
            grown[:, :self.k] = self.F[:, :self.k]
            self.F = grown
        self.F[:, self.k:self.k + m] = G
        self.k += m
        self.pivots.extend(int(i) for i in idx)
        sq = np.einsum("ij,ij->i", G, G)
        self.captured += float(sq.sum())
        self.u -= sq
        self.u[self.u <= self.floor] = 0.0

    def result(self, drop_zero=False) -> LowRankApprox:
        F = self.F[:, :self.k]
        piv = np.asarray(self.pivots, dtype=np.intp)
        if drop_zero and self.k:
            keep = np.flatnonzero(np.any(F != 0, axis=0))
            F, piv = F[:, keep], piv[keep]
        F = np.asfortranarray(F)
        L = np.tril(F[piv, :]) if len(piv) else np.zeros((0, 0))
        return LowRankApprox(F, piv, L, self.u.copy())


def _done(config: RunConfig, rounds_done: int, rank: int, rel_error: float) -> bool:
    if config.rounds is not None and rounds_done >= config.rounds:
        return True
    if config.rank is not None and rank >= config.rank:
        return True
    return config.stop_tol > 0 and rel_error <= config.stop_tol


def _capacity(config: RunConfig, n: int) -> int:
    if config.rank is not None:
        return min(n, config.rank + config.block_size)
    return min(n, config.rounds * config.block_size)


def simple_rpcholesky(A, k: int, seed=None):
    """Sequential RPCholesky: k pivots, one column evaluation each."""
    oracle = _as_oracle(A)
    if not 1 <= k <= oracle.dimension():
        raise ValueError(f"k must lie in [1, {oracle.dimension()}]")
    rng = make_rng(seed)
    st = _Factorization(oracle, k)
    trace = PivotTrace(target_rank=k)
    while st.k < k:
        if st.exhausted():
            trace.rank_exhausted = True
            break
        s = st.propose(rng.random(1))
        C = st.residual_columns(s)
        g = C[s[0], 0]
        if not g > st.floor:
            # stale diagonal entry; the fresh residual says it is numerically zero
            st.u[s] = 0.0
            trace.rounds.append(RoundRecord(s, s[:0], st.residual_trace))
            continue
        st.extend(s, C, np.array([[np.sqrt(g)]]))
        trace.rounds.append(RoundRecord(s, s, st.residual_trace))
    return st.result(), trace


def _unique_in_order(idx):
    return np.fromiter(dict.fromkeys(int(i) for i in idx), dtype=np.intp)


def block_rpcholesky(A, config: RunConfig):
    """Block RPCholesky: b i.i.d. proposals per round, all distinct ones kept."""
    oracle = _as_oracle(A)
    rng = make_rng(config.seed)
    b = config.block_size
    st = _Factorization(oracle, _capacity(config, oracle.dimension()))
    trace = PivotTrace(target_rank=config.rank)
    shift = 64.0 * EPS * st.trace_a / st.n
    rounds = 0
    while not _done(config, rounds, st.k, st.residual_trace / st.trace_a):
        if st.exhausted():
            trace.rank_exhausted = True
            break
        proposed = st.propose(rng.random(b))
        uniq = _unique_in_order(proposed)
        C = st.residual_columns(uniq)
        H = C[uniq, :]
        H = 0.5 * (H + H.T)
        L = _cholesky(H, st.floor)
        if L is None:
            L = _cholesky(H + shift * np.eye(len(uniq)), 0.0)
            trace.shifted_rounds.append(rounds)
            if L is None:
                raise NumericalError(f"Cholesky of round {rounds} block failed after diagonal shift")
        st.extend(uniq, C, L)
        trace.rounds.append(RoundRecord(proposed, uniq, st.residual_trace))
        rounds += 1
    return st.result(drop_zero=True), trace


def _cholesky(H, floor):
    try:
        L = np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        return None
    d = np.diag(L)
    if not np.all(np.isfinite(L)) or np.any(d * d <= floor):
        return None
    return L


def accelerated_rpcholesky(A, config: RunConfig):
    """Accelerated RPCholesky: block proposals thinned by rejection sampling.

    The accepted pivots follow the same distribution as sequential
    RPCholesky while columns are generated and processed in blocks.
    """
    oracle = _as_oracle(A)
    rng = make_rng(config.seed)
    b = config.block_size
    st = _Factorization(oracle, _capacity(config, oracle.dimension()))
    trace = PivotTrace(target_rank=config.rank)
    rounds = 0
    while not _done(config, rounds, st.k, st.residual_trace / st.trace_a):
        if st.exhausted():
            trace.rank_exhausted = True
            break
        proposed = st.propose(rng.random(b))
        H = st.residual_block(proposed)
        accepted, L = rejection_sample_submatrix(H, proposed, rng, st.floor)
        if len(accepted):
            st.extend(accepted, st.residual_columns(accepted), L)
        trace.rounds.append(RoundRecord(proposed, accepted, st.residual_trace))
        rounds += 1
    return st.result(), trace


def _greedy_block(H, b, floor):
    """Greedy pivoted Cholesky on H until its residual trace drops by a factor b."""
    H = np.array(H, dtype=np.float64)
    m = H.shape[0]
    d = np.maximum(np.diag(H), 0.0)
    total = d.sum()
    cols, chosen = [], []
    active = np.ones(m, dtype=bool)
    while active.any():
        cand = np.where(active, d, -np.inf)
        j = int(np.argmax(cand))
        if not d[j] > floor:
            break
        col = H[:, j] / np.sqrt(H[j, j])
        H -= np.outer(col, col)
        cols.append(col)
        chosen.append(j)
        active[j] = False
        d = np.maximum(np.diag(H), 0.0)
        if d[active].sum() <= total / b:
            break
    chosen = np.asarray(chosen, dtype=np.intp)
    if not len(chosen):
        return chosen, np.zeros((0, 0))
    L = np.tril(np.column_stack(cols)[chosen, :])
    return chosen, L


def rbrp_cholesky(A, config: RunConfig):
    """Robust blockwise random pivoting, Cholesky form.

    Proposals are drawn as in block RPCholesky, then filtered by greedy
    pivoting on the residual proposal block, which stops once the block's
    residual trace has fallen by a factor of b.
    """
    oracle = _as_oracle(A)
    rng = make_rng(config.seed)
    b = config.block_size
    st = _Factorization(oracle, _capacity(config, oracle.dimension()))
    trace = PivotTrace(target_rank=config.rank)
    rounds = 0
    while not _done(config, rounds, st.k, st.residual_trace / st.trace_a):
        if st.exhausted():
            trace.rank_exhausted = True
            break
        proposed = st.propose(rng.random(b))
        uniq = _unique_in_order(proposed)
        H = st.residual_block(uniq)
        pos, L = _greedy_block(H, b, st.floor)
        accepted = uniq[pos]
        if len(accepted):
            st.extend(accepted, st.residual_columns(accepted), L)
        trace.rounds.append(RoundRecord(proposed, accepted, st.residual_trace))
        rounds += 1
    return st.result(), trace


def relative_trace_error(A, approx: LowRankApprox) -> float:
    """``tr(A - F F^T) / tr(A)`` via the trace identity, clamped to [0, 1]."""
    oracle = _as_oracle(A)
    tr = oracle.trace()
    if not tr > 0:
        raise ValueError("matrix has zero trace")
    return float(np.clip((tr - approx.approx_trace()) / tr, 0.0, 1.0))


def partial_cholesky(A, pivots) -> LowRankApprox:
    """Deterministic partial Cholesky with a prescribed pivot order."""
    oracle = _as_oracle(A)
    pivots = np.asarray(pivots, dtype=np.intp)
    if len(set(pivots.tolist())) != len(pivots):
        raise ValueError("pivots must be distinct")
    st = _Factorization(oracle, len(pivots))
    for s in pivots:
        C = st.residual_columns(np.array([s]))
        g = C[s, 0]
        if not g > st.floor:
            raise NumericalError(f"degenerate pivot {s}: residual diagonal {g:.3e}")
        st.extend([s], C, np.array([[np.sqrt(g)]]))
    return st.result()
