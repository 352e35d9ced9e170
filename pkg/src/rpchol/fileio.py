"""Readers and writers for point sets, factors, pivot traces and KRR models.

Binary layouts are little-endian throughout.

``RPCF``: magic, u32 version, u64 N, u64 k, N*k float64 factor (column-major),
k u64 pivots, u64 count, then the lower triangle of L packed row-wise.

``RPQF``: magic, u32 version, u64 M, u64 N, M*N float64 (column-major).
"""
from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .cholesky import LowRankApprox, PivotTrace

__all__ = [
    "FormatError",
    "write_factor",
    "read_factor",
    "write_dense",
    "read_dense",
    "write_pivot_trace",
    "read_points_csv",
    "write_points_csv",
    "read_vector_csv",
    "read_libsvm",
    "write_model",
    "read_model",
]

VERSION = 1
_HEAD = struct.Struct("<4sIQQ")


class FormatError(ValueError):
    pass


def _read_exact(f, n):
    buf = f.read(n)
    if len(buf) != n:
        raise FormatError("truncated file")
    return buf


def _header(f, magic):
    tag, version, a, b = _HEAD.unpack(_read_exact(f, _HEAD.size))
    if tag != magic:
        raise FormatError(f"bad magic {tag!r}, expected {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    return a, b


def _reals(f, count, shape=None):
    arr = np.frombuffer(_read_exact(f, 8 * count), dtype="<f8").astype(np.float64)
    return arr if shape is None else arr.reshape(shape, order="F")


def write_factor(path, approx: LowRankApprox) -> None:
    F = np.asarray(approx.factor, dtype="<f8")
    n, k = F.shape
    L = np.tril(F[approx.pivots]) if approx.chol_factor is None else np.asarray(approx.chol_factor)
    rows, cols = np.tril_indices(k)
    packed = L[rows, cols]
    with open(path, "wb") as f:
        f.write(_HEAD.pack(b"RPCF", VERSION, n, k))
        f.write(F.tobytes(order="F"))
        f.write(np.asarray(approx.pivots, dtype="<u8").tobytes())
        f.write(struct.pack("<Q", packed.size))
        f.write(packed.astype("<f8").tobytes())


def read_factor(path) -> LowRankApprox:
    """Read an RPCF file.  The residual diagonal is not stored and comes back as NaN."""
    with open(path, "rb") as f:
        n, k = _header(f, b"RPCF")
        F = _reals(f, n * k, (n, k))
        piv = np.frombuffer(_read_exact(f, 8 * k), dtype="<u8").astype(np.intp)
        (count,) = struct.unpack("<Q", _read_exact(f, 8))
        if count != k * (k + 1) // 2:
            raise FormatError(f"packed triangle has {count} entries, expected {k * (k + 1) // 2}")
        packed = _reals(f, count)
        if f.read(1):
            raise FormatError("trailing bytes")
    L = np.zeros((k, k))
    L[np.tril_indices(k)] = packed
    if np.any(piv >= n):
        raise FormatError("pivot index out of range")
    return LowRankApprox(np.asfortranarray(F), piv, L, np.full(n, np.nan))


def write_dense(path, B) -> None:
    B = np.asarray(B, dtype="<f8")
    if B.ndim != 2:
        raise ValueError("expected a matrix")
    with open(path, "wb") as f:
        f.write(_HEAD.pack(b"RPQF", VERSION, *B.shape))
        f.write(B.tobytes(order="F"))


def read_dense(path) -> np.ndarray:
    with open(path, "rb") as f:
        m, n = _header(f, b"RPQF")
        B = _reals(f, m * n, (m, n))
        if f.read(1):
            raise FormatError("trailing bytes")
    return B


def write_pivot_trace(path, trace: PivotTrace) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["round", "proposed", "accepted", "acceptance_rate"])
        for i, rec in enumerate(trace.rounds):
            w.writerow([i, len(rec.proposed), rec.acceptance_count, repr(float(rec.acceptance_rate))])


def read_points_csv(path, header: bool = False) -> np.ndarray:
    X = np.loadtxt(path, delimiter=",", skiprows=1 if header else 0, dtype=np.float64, ndmin=2)
    if X.size == 0:
        raise FormatError(f"{path}: no points")
    return X


def write_points_csv(path, X) -> None:
    np.savetxt(path, np.atleast_2d(X), delimiter=",", fmt="%.17g")


def read_vector_csv(path, header: bool = False) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", skiprows=1 if header else 0, dtype=np.float64, ndmin=1).ravel()


def read_libsvm(path, n_features: int | None = None):
    """Parse LIBSVM text (``label idx:val ...``, 1-based) into dense ``(X, y)``."""
    labels, entries = [], []
    width = 0
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            labels.append(float(parts[0]))
            row = []
            for tok in parts[1:]:
                i, v = tok.split(":")
                i = int(i)
                if i < 1:
                    raise FormatError(f"line {lineno}: feature indices are 1-based")
                row.append((i - 1, float(v)))
                width = max(width, i)
        except ValueError as exc:
            raise FormatError(f"line {lineno}: {exc}") from None
        entries.append(row)
    if n_features is not None:
        if width > n_features:
            raise FormatError(f"feature index {width} exceeds n_features={n_features}")
        width = n_features
    X = np.zeros((len(labels), width))
    for r, row in enumerate(entries):
        for c, v in row:
            X[r, c] = v
    return X, np.asarray(labels)


def write_model(path, model) -> Path:
    """Write the preconditioner factor (RPCF) plus a ``.csv`` sidecar; returns the sidecar path."""
    path = Path(path)
    F = model.preconditioner_factor
    if F is None:
        F = np.zeros((model.training_points.n_points, 0))
    piv = np.zeros(0, dtype=np.intp) if model.pivots is None else model.pivots
    k = F.shape[1]
    # rows of F at the pivots form the Cholesky factor of A[S, S]
    L = np.tril(F[piv]) if k else np.zeros((0, 0))
    write_factor(path, LowRankApprox(F, piv, L, np.zeros(F.shape[0])))
    side = path.with_suffix(path.suffix + ".csv")
    with open(side, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["key", "value"])
        w.writerow(["kernel", model.kernel.kind.value])
        w.writerow(["sigma", repr(model.kernel.bandwidth)])
        w.writerow(["mu", repr(model.regularization)])
        w.writerow(["target_mean", repr(model.target_mean)])
        for i, c in enumerate(model.coefficients):
            w.writerow([f"beta_{i}", repr(float(c))])
    return side


def read_model(path, training_points):
    from .kernels import DataMatrix, KernelSpec
    from .krr import KrrModel

    path = Path(path)
    approx = read_factor(path)
    meta, beta = {}, []
    with open(path.with_suffix(path.suffix + ".csv"), newline="") as f:
        for key, value in list(csv.reader(f))[1:]:
            if key.startswith("beta_"):
                beta.append(float(value))
            else:
                meta[key] = value
    data = training_points if isinstance(training_points, DataMatrix) else DataMatrix(training_points)
    if len(beta) != data.n_points:
        raise FormatError("coefficient count does not match the training set")
    return KrrModel(
        data,
        KernelSpec(meta["kernel"], float(meta["sigma"])),
        float(meta["mu"]),
        np.asarray(beta),
        float(meta["target_mean"]),
        approx.factor if approx.rank else None,
        approx.pivots if approx.rank else None,
    )
