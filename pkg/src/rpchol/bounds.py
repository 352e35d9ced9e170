"""Error-bound machinery: the map phi, its matrix version and sufficient pivot counts.

All counts are returned as reals; callers round up.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Spectrum",
    "BoundQuery",
    "BoundReport",
    "phi",
    "phi_matrix_diag",
    "sufficient_pivots_simple",
    "sufficient_proposals_block",
    "drvw_sufficient_rounds",
    "worst_case_recursion",
    "two_cluster_spectrum",
    "continuous_time_rounds",
    "evaluate_bounds",
    "OutOfScope",
]


class OutOfScope(ValueError):
    """Raised when a bound is requested outside the parameter range it covers."""


def _as_spectrum(lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=np.float64).ravel()
    if lam.size == 0:
        raise ValueError("empty spectrum")
    if not np.all(np.isfinite(lam)) or np.any(lam < 0):
        raise ValueError("eigenvalues must be finite and nonnegative")
    return np.sort(lam)[::-1]


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues sorted non-increasing."""

    eigenvalues: np.ndarray

    def __post_init__(self):
        lam = _as_spectrum(self.eigenvalues)
        lam.setflags(write=False)
        object.__setattr__(self, "eigenvalues", lam)

    @property
    def trace(self) -> float:
        return float(self.eigenvalues.sum())

    def __len__(self):
        return self.eigenvalues.size


@dataclass(frozen=True)
class BoundQuery:
    target_rank: int
    accuracy: float
    block_size: int
    spectrum: Spectrum

    def __post_init__(self):
        if not isinstance(self.spectrum, Spectrum):
            object.__setattr__(self, "spectrum", Spectrum(self.spectrum))
        n = len(self.spectrum)
        if not 1 <= self.target_rank < n:
            raise ValueError(f"target rank must lie in [1, {n - 1}]")
        if not self.accuracy > 0:
            raise ValueError("accuracy must be positive")
        if self.block_size < 1:
            raise ValueError("block size must be at least 1")
        if not self.spectrum.eigenvalues[: self.target_rank].sum() > 0:
            raise ValueError("leading eigenvalues sum to zero, eta is undefined")

    @property
    def eta(self) -> float:
        lam = self.spectrum.eigenvalues
        r = self.target_rank
        return float(lam[r:].sum() / lam[:r].sum())


@dataclass
class BoundReport:
    sufficient_count: float
    eta: float
    log_floored: bool = False
    exact_rank: bool = False
    trajectory: np.ndarray | None = None
    notes: list = field(default_factory=list)


def phi(alpha, x, b: int = 1):
    """b-fold iterate of ``x -> x - x^2 / alpha``; vectorized over x and alpha."""
    alpha = np.asarray(alpha, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if np.any(alpha <= 0):
        raise ValueError("alpha must be positive")
    if np.any(x < 0) or np.any(x > alpha):
        raise ValueError("x must lie in [0, alpha]")
    if b < 0:
        raise ValueError("b must be nonnegative")
    y = x
    for _ in range(b):
        y = y - y * y / alpha
    return float(y) if y.ndim == 0 else y


def phi_matrix_diag(spectrum, b: int, t: int) -> Spectrum:
    """Apply ``Phi_b`` t times to a diagonal matrix given by its eigenvalues.

    Each application fixes ``alpha`` at the current trace and maps every
    eigenvalue through the b-fold iterate.
    """
    lam = _as_spectrum(spectrum.eigenvalues if isinstance(spectrum, Spectrum) else spectrum)
    for _ in range(t):
        alpha = lam.sum()
        if not alpha > 0:
            return Spectrum(np.zeros_like(lam))
        lam = np.clip(phi(alpha, np.minimum(lam, alpha), b), 0.0, None)
    return Spectrum(lam)


def _log_term(q: BoundQuery, report: BoundReport):
    eta = report.eta
    if eta == 0:
        report.exact_rank = True
        report.notes.append("exact-rank regime: zero tail, the bound is infinite")
        return np.inf
    ee = q.accuracy * eta
    if ee >= 1:
        report.log_floored = True
        report.notes.append("eps * eta >= 1: log term floored at 0")
        return 0.0
    return float(np.log(1.0 / ee))


def sufficient_pivots_simple(q: BoundQuery) -> BoundReport:
    """Pivots sufficient for simple RPCholesky: ``r/eps + r log(1/(eps eta))``."""
    report = BoundReport(np.nan, q.eta)
    lg = _log_term(q, report)
    r = q.target_rank
    report.sufficient_count = np.inf if np.isinf(lg) else r / q.accuracy + r * lg
    return report


def sufficient_proposals_block(q: BoundQuery) -> BoundReport:
    """Proposals ``bt`` sufficient for block or accelerated RPCholesky."""
    report = BoundReport(np.nan, q.eta)
    lg = _log_term(q, report)
    r, b = q.target_rank, q.block_size
    report.sufficient_count = np.inf if np.isinf(lg) else r / q.accuracy + (r + b) * lg
    return report


def drvw_sufficient_rounds(q: BoundQuery) -> BoundReport:
    """Rounds sufficient with a large block: ``1 + log(1/eta + 1) / log(3/eps)``.

    Covers ``eps <= 3/2`` and ``b >= 3r/eps`` only.
    """
    eps, r, b = q.accuracy, q.target_rank, q.block_size
    if eps > 1.5 or b < 3 * r / eps:
        raise OutOfScope(f"outside the range of this bound: needs eps <= 3/2 and b >= 3r/eps = {3 * r / eps:g}")
    eta = q.eta
    report = BoundReport(np.nan, eta)
    if eta == 0:
        report.exact_rank = True
        report.sufficient_count = np.inf
        return report
    report.sufficient_count = 1.0 + np.log(1.0 / eta + 1.0) / np.log(3.0 / eps)
    return report


def worst_case_recursion(alpha0: float, beta: float, r: int, b: int, t: int) -> np.ndarray:
    """Leading-cluster trace ``alpha^(0..t)`` for the two-cluster worst case."""
    if not alpha0 > 0:
        raise ValueError("alpha0 must be positive")
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    out = np.empty(t + 1)
    out[0] = a = float(alpha0)
    for i in range(1, t + 1):
        a = a - b * a * a / ((b + r) * a + r * beta)
        out[i] = a
    return out


def two_cluster_spectrum(r: int, n: int, gamma: float, beta: float) -> Spectrum:
    """r eigenvalues ``gamma/r`` followed by ``n - r`` eigenvalues ``beta/(n - r)``."""
    if not 1 <= r < n:
        raise ValueError("need 1 <= r < n")
    if gamma < 0 or beta < 0:
        raise ValueError("cluster weights must be nonnegative")
    lam = np.concatenate([np.full(r, gamma / r), np.full(n - r, beta / (n - r))])
    return Spectrum(lam)


def continuous_time_rounds(q: BoundQuery) -> float:
    """Sharper round estimate ``(b+r)/b log(1/(eps eta)) + r/(b eps) - (r/b) eta``.

    The log term is floored at 0 as in the stated bounds.
    """
    report = BoundReport(np.nan, q.eta)
    lg = _log_term(q, report)
    if np.isinf(lg):
        return np.inf
    r, b, eps = q.target_rank, q.block_size, q.accuracy
    return (b + r) / b * lg + r / (b * eps) - r / b * report.eta


def evaluate_bounds(q: BoundQuery, drvw: bool = False, trajectory: int | None = None) -> dict:
    """Collect every applicable bound for one query as a flat record."""
    simple = sufficient_pivots_simple(q)
    block = sufficient_proposals_block(q)
    rec = {
        "r": q.target_rank,
        "eps": q.accuracy,
        "b": q.block_size,
        "eta": q.eta,
        "simple_pivots": simple.sufficient_count,
        "block_proposals": block.sufficient_count,
        "block_rounds": block.sufficient_count / q.block_size,
        "continuous_rounds": continuous_time_rounds(q),
        "log_floored": simple.log_floored,
        "exact_rank": simple.exact_rank,
    }
    if drvw:
        rec["drvw_rounds"] = drvw_sufficient_rounds(q).sufficient_count
    if trajectory is not None:
        lam = q.spectrum.eigenvalues
        r = q.target_rank
        rec["trajectory"] = worst_case_recursion(lam[:r].sum(), lam[r:].sum(), r, q.block_size, trajectory)
    return rec
