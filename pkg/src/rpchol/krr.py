"""Kernel ridge regression solved by PCG with a low-rank Nystrom preconditioner."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .cholesky import RunConfig, accelerated_rpcholesky
from .kernels import DataMatrix, KernelOracle, KernelSpec

__all__ = [
    "Preconditioner",
    "PcgReport",
    "KrrModel",
    "KernelMatvec",
    "build_preconditioner",
    "pcg_solve",
    "fit_krr",
    "predict",
    "mean_absolute_error",
    "inverse_distance_features",
    "standardize_features",
]

log = logging.getLogger(__name__)


@dataclass
class Preconditioner:
    """``P = F F^T + mu I`` with a cached Cholesky factor of ``F^T F + mu I``."""

    factor: np.ndarray
    mu: float
    core: tuple | None = None

    def apply(self, v):
        F = self.factor
        return F @ (F.T @ v) + self.mu * v

    def apply_inverse(self, v):
        """Woodbury: ``(v - F (F^T F + mu I)^{-1} F^T v) / mu``."""
        v = np.asarray(v, dtype=np.float64)
        if self.factor.shape[1] == 0:
            return v / self.mu
        w = sla.cho_solve(self.core, self.factor.T @ v, check_finite=False)
        return (v - self.factor @ w) / self.mu


def build_preconditioner(F, mu: float) -> Preconditioner:
    if not mu > 0:
        raise ValueError("mu must be positive")
    F = np.asarray(F, dtype=np.float64)
    if F.ndim != 2:
        raise ValueError("F must be an N x k matrix")
    if not np.all(np.isfinite(F)):
        raise ValueError("F contains NaN or Inf")
    core = None
    if F.shape[1]:
        core = sla.cho_factor(F.T @ F + mu * np.eye(F.shape[1]), lower=True)
    return Preconditioner(F, float(mu), core)


@dataclass
class PcgReport:
    iterations: int = 0
    relative_residuals: list = field(default_factory=list)
    unregularized_residuals: list = field(default_factory=list)
    converged: bool = False
    final_true_residual: float = float("nan")


def pcg_solve(matvec, precond: Preconditioner | None, y, tol: float = 1e-3,
              max_iters: int = 1000, mu: float | None = None):
    """Preconditioned CG for ``(A + mu I) beta = y``.

    ``matvec`` applies ``A + mu I``.  The stopping test uses the regularized
    relative residual.  When ``mu`` is given, ``|A beta - y| / |y|`` is logged
    as well, recovered from the recursive residual without extra matvecs.
    Returns ``(beta, PcgReport)``; on non-convergence the iterate with the
    smallest residual is returned.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    y = np.asarray(y, dtype=np.float64)
    ynorm = np.linalg.norm(y)
    if not ynorm > 0:
        raise ValueError("right-hand side is zero")
    solve = (lambda r: r) if precond is None else precond.apply_inverse
    report = PcgReport()
    beta = np.zeros_like(y)
    r = y.copy()
    z = solve(r)
    p = z.copy()
    rz = r @ z
    best, best_res = beta.copy(), 1.0
    for it in range(1, max_iters + 1):
        Ap = matvec(p)
        alpha = rz / (p @ Ap)
        beta += alpha * p
        r -= alpha * Ap
        res = np.linalg.norm(r) / ynorm
        report.iterations = it
        report.relative_residuals.append(res)
        if mu is not None:
            report.unregularized_residuals.append(np.linalg.norm(r + mu * beta) / ynorm)
        if res < best_res:
            best, best_res = beta.copy(), res
        if res < tol:
            report.converged = True
            break
        z = solve(r)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    if not report.converged:
        beta = best
        log.warning("PCG stopped after %d iterations at residual %.3e", report.iterations, best_res)
    report.final_true_residual = float(np.linalg.norm(y - matvec(beta)) / ynorm)
    return beta, report


class KernelMatvec:
    """``v -> (A + mu I) v`` for a kernel matrix, generated in row blocks.

    Small problems (``N <= dense_limit``) cache the matrix instead.
    """

    def __init__(self, oracle: KernelOracle, mu: float = 0.0, block_rows: int = 1024,
                 dense_limit: int = 4096):
        self.oracle = oracle
        self.mu = float(mu)
        self.block_rows = int(block_rows)
        n = oracle.dimension()
        self._dense = oracle.submatrix(None, None) if n <= dense_limit else None

    def kernel_matvec(self, v):
        if self._dense is not None:
            return self._dense @ v
        n = self.oracle.dimension()
        out = np.empty(n)
        for start in range(0, n, self.block_rows):
            rows = np.arange(start, min(start + self.block_rows, n))
            out[rows] = self.oracle.submatrix(rows, None) @ v
        return out

    def __call__(self, v):
        return self.kernel_matvec(v) + self.mu * v


@dataclass
class KrrModel:
    training_points: DataMatrix
    kernel: KernelSpec
    regularization: float
    coefficients: np.ndarray
    target_mean: float
    preconditioner_factor: np.ndarray | None = None
    pivots: np.ndarray | None = None


def fit_krr(data: DataMatrix, targets, kernel: KernelSpec, mu: float | None = None,
            precond_rank: int = 0, config: RunConfig | None = None, tol: float = 1e-3,
            max_iters: int = 1000, block_rows: int = 1024, dense_limit: int = 4096):
    """Fit ``f(x) = sum_i beta_i kappa(x_i, x) + mean(y)``.

    ``mu`` defaults to ``1e-9 * N``.  The preconditioner comes from accelerated
    RPCholesky run until ``precond_rank`` pivots are accepted (0 disables it).
    """
    if not isinstance(data, DataMatrix):
        data = DataMatrix(data)
    y = np.asarray(targets, dtype=np.float64).ravel()
    n = data.n_points
    if y.shape != (n,):
        raise ValueError(f"expected {n} targets, got {y.size}")
    mu = 1e-9 * n if mu is None else float(mu)
    oracle = KernelOracle(data, kernel)
    mean = float(y.mean())
    yc = y - mean
    F, pivots, precond = None, None, None
    if precond_rank > 0:
        if config is None:
            config = RunConfig(block_size=min(precond_rank, 100), rank=precond_rank)
        elif config.rank is None and config.rounds is None:
            config = RunConfig(config.block_size, rank=precond_rank, seed=config.seed)
        approx, _ = accelerated_rpcholesky(oracle, config)
        F, pivots = approx.factor, approx.pivots
        precond = build_preconditioner(F, mu)
    if not np.any(yc):
        report = PcgReport(converged=True, final_true_residual=0.0)
        beta = np.zeros(n)
    else:
        op = KernelMatvec(oracle, mu, block_rows, dense_limit)
        beta, report = pcg_solve(op, precond, yc, tol, max_iters, mu=mu)
    model = KrrModel(data, kernel, mu, beta, mean, F, pivots)
    return model, report


def predict(model: KrrModel, query, block_rows: int = 1024) -> np.ndarray:
    if not isinstance(query, DataMatrix):
        query = DataMatrix(query)
    if query.dim != model.training_points.dim:
        raise ValueError(f"query dimension {query.dim} != training dimension {model.training_points.dim}")
    # a single oracle over [train; query] keeps the distance code in one place
    both = DataMatrix(np.vstack([model.training_points.points, query.points]))
    oracle = KernelOracle(both, model.kernel)
    n = model.training_points.n_points
    train = np.arange(n)
    out = np.empty(query.n_points)
    for start in range(0, query.n_points, block_rows):
        q = np.arange(start, min(start + block_rows, query.n_points))
        out[q] = oracle.submatrix(n + q, train) @ model.coefficients
    return out + model.target_mean


def mean_absolute_error(pred, actual) -> float:
    pred, actual = np.asarray(pred, dtype=np.float64), np.asarray(actual, dtype=np.float64)
    if pred.shape != actual.shape:
        raise ValueError("length mismatch")
    if pred.size == 0:
        raise ValueError("empty input")
    return float(np.mean(np.abs(pred - actual)))


def inverse_distance_features(atom_positions) -> np.ndarray:
    """Inverse pairwise distances ``1/|r_i - r_j|``, i < j in lexicographic order.

    Accepts one frame (n_atoms x 3) or a stack of frames (n_frames x n_atoms x 3).
    """
    R = np.asarray(atom_positions, dtype=np.float64)
    single = R.ndim == 2
    if single:
        R = R[None]
    if R.ndim != 3 or R.shape[2] != 3:
        raise ValueError("atom positions must have shape (n_atoms, 3) or (n_frames, n_atoms, 3)")
    if R.shape[1] < 2:
        raise ValueError("need at least two atoms")
    i, j = np.triu_indices(R.shape[1], k=1)
    dist = np.linalg.norm(R[:, i, :] - R[:, j, :], axis=2)
    if np.any(dist == 0):
        raise ValueError("singular feature: coincident atoms")
    feats = 1.0 / dist
    return feats[0] if single else feats


def standardize_features(X):
    """Center and scale each column by its population std; constant columns are dropped.

    Returns ``(Z, mean, std, kept)``.
    """
    X = np.asarray(X, dtype=np.float64)
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    kept = std > 0
    if not kept.all():
        warnings.warn(f"dropping {int((~kept).sum())} zero-variance feature(s)", stacklevel=2)
    Z = (X[:, kept] - mean[kept]) / std[kept]
    return Z, mean[kept], std[kept], kept
