"""Synthetic point sets used in the experiments.

Every generator is a pure function of its spec and seed.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fileio import read_libsvm, read_points_csv
from .kernels import DataMatrix

__all__ = ["DatasetSpec", "generate_dataset", "smile", "spiral", "outlier_cloud", "gaussian_cloud"]

KINDS = ("smile", "spiral", "outliers", "gaussian", "file")


@dataclass(frozen=True)
class DatasetSpec:
    """``kind`` selects the generator; ``params`` holds its keyword arguments.

    smile: radius, noise (plus layout overrides, see :func:`smile`).  spiral: turns, scale.  outliers: dim, n_outliers,
    shift.  gaussian: dim.  file: path, format ("csv" or "libsvm"), header.
    """

    kind: str
    n_points: int = 1000
    seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown dataset kind {self.kind!r}; expected one of {KINDS}")
        if self.kind != "file" and self.n_points < 1:
            raise ValueError("n_points must be at least 1")


# Smile layout as fractions of the radius.  Nine tenths of the points sit in
# two point-like eyes (only the jitter spreads them); the rest spread thinly
# along the mouth arc.  The dense, nearly duplicated eyes are what make
# block proposals redundant.
EYE_CENTERS = ((-0.4, 0.35), (0.4, 0.35))
EYE_FRACTION = 0.9
EYE_SPREAD = 0.0
MOUTH_RADIUS = 0.7
MOUTH_SPAN = (np.pi * 1.2, np.pi * 1.8)
SMILE_NOISE = 0.005


def _truncated_jitter(rng, n, dim, noise):
    """Gaussian jitter with norms capped at 4 * noise."""
    z = rng.standard_normal((n, dim)) * noise
    norms = np.linalg.norm(z, axis=1)
    cap = 4.0 * noise
    over = norms > cap
    z[over] *= (cap / norms[over])[:, None]
    return z


def smile(n: int, radius: float = 10.0, noise: float = SMILE_NOISE, seed=0,
          eye_fraction: float = EYE_FRACTION, eye_spread: float = EYE_SPREAD,
          mouth_radius: float = MOUTH_RADIUS, mouth_span=MOUTH_SPAN) -> np.ndarray:
    """Two eye clusters plus a mouth arc, inside the disk of the given radius.

    Without jitter every point lies within ``0.7 * radius`` of the origin, so
    with ``eye_spread <= 0.05`` the points stay within ``radius + 4 * noise``.
    """
    rng = np.random.default_rng(seed)
    n_eyes = int(round(eye_fraction * n))
    n_mouth = n - n_eyes
    which = rng.integers(0, 2, size=n_eyes)
    eyes = np.asarray(EYE_CENTERS)[which] * radius
    if eye_spread:
        eyes += _truncated_jitter(rng, n_eyes, 2, eye_spread * radius)
    theta = rng.uniform(*mouth_span, size=n_mouth)
    mouth = mouth_radius * radius * np.column_stack([np.cos(theta), np.sin(theta)])
    X = np.vstack([eyes, mouth])
    X += _truncated_jitter(rng, n, 2, noise)
    return X[rng.permutation(n)]


def spiral(n: int, turns: float = 3.0, scale: float = 1.0, noise: float = 0.0, seed=0) -> np.ndarray:
    """Archimedean spiral ``r = scale * theta / (2 pi)`` over the given number of turns."""
    rng = np.random.default_rng(seed)
    theta = np.sort(rng.uniform(0.0, 2 * np.pi * turns, size=n))
    r = scale * theta / (2 * np.pi)
    X = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    if noise:
        X += rng.standard_normal(X.shape) * noise
    return X


def gaussian_cloud(n: int, dim: int = 2, seed=0) -> np.ndarray:
    return np.random.default_rng(seed).standard_normal((n, dim))


def outlier_cloud(n: int, dim: int = 20, n_outliers: int = 50, shift: float = 100.0, seed=0):
    """Standard Gaussian cloud with ``n_outliers`` points moved by ``shift`` along random directions.

    Returns ``(X, outlier_indices)``.
    """
    if not 0 <= n_outliers <= n:
        raise ValueError("n_outliers must lie in [0, n]")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, dim))
    idx = np.sort(rng.choice(n, size=n_outliers, replace=False))
    v = rng.standard_normal((n_outliers, dim))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    X[idx] += shift * v
    return X, idx


def generate_dataset(spec: DatasetSpec) -> DataMatrix:
    p = dict(spec.params)
    n, seed = spec.n_points, spec.seed
    if spec.kind == "smile":
        X = smile(n, seed=seed, **p)
    elif spec.kind == "spiral":
        X = spiral(n, seed=seed, **p)
    elif spec.kind == "gaussian":
        X = gaussian_cloud(n, seed=seed, **p)
    elif spec.kind == "outliers":
        X, _ = outlier_cloud(n, seed=seed, **p)
    else:
        fmt = p.get("format", "csv")
        if fmt == "csv":
            X = read_points_csv(p["path"], header=bool(p.get("header", False)))
        elif fmt == "libsvm":
            X, _ = read_libsvm(p["path"])
        else:
            raise ValueError(f"unknown file format {fmt!r}")
    return DataMatrix(X)
