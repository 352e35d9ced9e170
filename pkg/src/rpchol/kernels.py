"""Kernel functions, point sets and the submatrix access oracles.

An oracle exposes a psd matrix only through ``dimension()``, ``diag()`` and
``submatrix(rows, cols)``.  Kernel oracles keep the point set and regenerate
blocks on demand; the full matrix is never formed.
"""
from __future__ import annotations

import abc
import enum
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist

__all__ = [
    "KernelKind",
    "DistanceMode",
    "DataMatrix",
    "KernelSpec",
    "PsdOracle",
    "DenseOracle",
    "KernelOracle",
    "eval_entry",
    "squared_distance_block",
    "kernel_submatrix",
    "median_bandwidth",
]


class KernelKind(str, enum.Enum):
    GAUSSIAN = "gaussian"
    L1_LAPLACE = "l1laplace"
    MATERN32 = "matern32"
    MATERN52 = "matern52"

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        key = str(name).lower().replace("-", "").replace("_", "").replace("/", "")
        aliases = {"laplace": "l1laplace", "l1": "l1laplace", "rbf": "gaussian"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown kernel {name!r}") from None


class DistanceMode(str, enum.Enum):
    DIRECT = "direct"
    GRAM_TRICK = "gram"


@dataclass(frozen=True)
class DataMatrix:
    """N points in R^d, one per row."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError(f"points must be a nonempty N x d array, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points contain NaN or Inf")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.n_points


@dataclass(frozen=True)
class KernelSpec:
    kind: KernelKind
    bandwidth: float

    def __post_init__(self):
        object.__setattr__(self, "kind", KernelKind.parse(self.kind))
        bw = float(self.bandwidth)
        if not np.isfinite(bw) or bw <= 0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")
        object.__setattr__(self, "bandwidth", bw)

    @property
    def translation_invariant(self) -> bool:
        """True when the kernel depends on the points only through the l2 distance."""
        return self.kind is not KernelKind.L1_LAPLACE

    def default_mode(self) -> DistanceMode:
        return DistanceMode.GRAM_TRICK if self.translation_invariant else DistanceMode.DIRECT

    def from_sqdist(self, sq: np.ndarray) -> np.ndarray:
        """Apply the radial profile to squared l2 distances."""
        s = self.bandwidth
        if self.kind is KernelKind.GAUSSIAN:
            return np.exp(sq * (-0.5 / (s * s)))
        rho = np.sqrt(sq) / s
        if self.kind is KernelKind.MATERN32:
            t = np.sqrt(3.0) * rho
            return (1.0 + t) * np.exp(-t)
        if self.kind is KernelKind.MATERN52:
            t = np.sqrt(5.0) * rho
            return (1.0 + t + t * t / 3.0) * np.exp(-t)
        raise ValueError(f"{self.kind.value} is not a function of the l2 distance")

    def from_l1dist(self, l1: np.ndarray) -> np.ndarray:
        return np.exp(-l1 / self.bandwidth)


def _as_point(x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if x.ndim != 1:
        raise ValueError("a point must be a 1-d vector")
    if not np.all(np.isfinite(x)):
        raise ValueError("point contains NaN or Inf")
    return x


def eval_entry(spec: KernelSpec, x, y) -> float:
    """Evaluate the kernel at a single pair of points."""
    x, y = _as_point(x), _as_point(y)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape[0]} vs {y.shape[0]}")
    diff = x - y
    if spec.kind is KernelKind.L1_LAPLACE:
        return float(spec.from_l1dist(np.abs(diff).sum()))
    return float(spec.from_sqdist(diff @ diff))


def _check_index(idx, n, allow_all=False):
    if idx is None:
        return slice(None) if allow_all else np.arange(n)
    idx = np.asarray(idx)
    if idx.ndim != 1:
        idx = np.atleast_1d(idx).ravel()
    if idx.size == 0:
        return idx.astype(np.intp)
    if idx.dtype.kind not in "iu":
        raise TypeError("indices must be integers")
    if idx.min() < 0 or idx.max() >= n:
        raise IndexError(f"index out of range for dimension {n}")
    return idx.astype(np.intp, copy=False)


def squared_distance_block(data: DataMatrix, rows, cols, mode=DistanceMode.GRAM_TRICK) -> np.ndarray:
    """Squared Euclidean distances between ``data[rows]`` and ``data[cols]``.

    With ``GRAM_TRICK`` the block is ``|x|^2 - 2<x, y> + |y|^2`` using one
    matrix-matrix product; negative values from cancellation are clamped to 0.
    """
    rows = _check_index(rows, data.n_points)
    cols = _check_index(cols, data.n_points)
    return _sqdist(data.points[rows], data.points[cols], DistanceMode(mode))


def _sqdist(X, Y, mode, nx=None, ny=None):
    if mode is DistanceMode.DIRECT:
        return cdist(X, Y, "sqeuclidean")
    if nx is None:
        nx = np.einsum("ij,ij->i", X, X)
    if ny is None:
        ny = np.einsum("ij,ij->i", Y, Y)
    sq = X @ Y.T
    sq *= -2.0
    sq += nx[:, None]
    sq += ny[None, :]
    np.maximum(sq, 0.0, out=sq)
    return sq


class PsdOracle(abc.ABC):
    """Positive-semidefinite matrix available through submatrix extraction only."""

    @abc.abstractmethod
    def dimension(self) -> int: ...

    @abc.abstractmethod
    def diag(self) -> np.ndarray: ...

    @abc.abstractmethod
    def _block(self, rows, cols: np.ndarray) -> np.ndarray:
        """``rows`` is an index array or ``slice(None)`` for all rows."""

    def submatrix(self, rows, cols) -> np.ndarray:
        """Return ``A[rows][:, cols]``; ``None`` selects every index."""
        n = self.dimension()
        return self._block(_check_index(rows, n, allow_all=True), _check_index(cols, n))

    def columns(self, cols) -> np.ndarray:
        return self.submatrix(None, cols)

    def trace(self) -> float:
        return float(self.diag().sum())

    def __len__(self):
        return self.dimension()


class DenseOracle(PsdOracle):
    """Oracle over an explicit matrix, stored column-major."""

    def __init__(self, matrix):
        A = np.asfortranarray(matrix, dtype=np.float64)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("matrix must be square")
        if not np.all(np.isfinite(A)):
            raise ValueError("matrix contains NaN or Inf")
        A.setflags(write=False)
        self.matrix = A
        self._diag = np.ascontiguousarray(np.diag(A))
        self._diag.setflags(write=False)
        if np.any(self._diag < 0):
            raise ValueError("matrix has a negative diagonal entry, it is not psd")

    def dimension(self):
        return self.matrix.shape[0]

    def diag(self):
        return self._diag.copy()

    def _block(self, rows, cols):
        if isinstance(rows, slice):
            return self.matrix[:, cols]
        return self.matrix[rows[:, None], cols]


class KernelOracle(PsdOracle):
    """Kernel matrix ``A[i, j] = kappa(x_i, x_j)`` generated block by block.

    ``panel`` bounds the number of columns generated per distance computation;
    results do not depend on it.
    """

    def __init__(self, data: DataMatrix, kernel: KernelSpec, mode=None, panel=4096):
        if not isinstance(data, DataMatrix):
            data = DataMatrix(data)
        self.data = data
        self.kernel = kernel
        mode = kernel.default_mode() if mode is None else DistanceMode(mode)
        if mode is DistanceMode.GRAM_TRICK and not kernel.translation_invariant:
            raise ValueError("the Gram trick needs a kernel of the l2 distance")
        self.mode = mode
        self.panel = int(panel)
        self._sqnorms = np.einsum("ij,ij->i", data.points, data.points)
        self._sqnorms.setflags(write=False)

    def dimension(self):
        return self.data.n_points

    def diag(self):
        # every supported kernel has kappa(x, x) = 1
        return np.ones(self.dimension())

    def _block(self, rows, cols):
        n_rows = self.dimension() if isinstance(rows, slice) else rows.size
        out = np.empty((n_rows, cols.size), order="F")
        for start in range(0, cols.size, self.panel):
            c = cols[start:start + self.panel]
            out[:, start:start + c.size] = self._evaluate(rows, c)
        return out

    def _evaluate(self, rows, cols):
        k = self.kernel
        X, Y = self.data.points[rows], self.data.points[cols]
        if k.kind is KernelKind.L1_LAPLACE:
            return k.from_l1dist(cdist(X, Y, "cityblock"))
        sq = _sqdist(X, Y, self.mode, self._sqnorms[rows], self._sqnorms[cols])
        return k.from_sqdist(sq)


def kernel_submatrix(oracle: PsdOracle, rows, cols) -> np.ndarray:
    return oracle.submatrix(rows, cols)


def median_bandwidth(data: DataMatrix, sample_size: int = 1000, seed=None) -> float:
    """Median pairwise l2 distance over a uniform subsample of the points."""
    if sample_size < 2:
        raise ValueError("sample_size must be at least 2")
    if data.n_points < 2:
        raise ValueError("need at least 2 points")
    rng = np.random.default_rng(seed)
    m = min(sample_size, data.n_points)
    idx = rng.choice(data.n_points, size=m, replace=False)
    med = float(np.median(pdist(data.points[idx])))
    if med <= 0:
        raise ValueError("degenerate bandwidth: median pairwise distance is 0")
    return med
