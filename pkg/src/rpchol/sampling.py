"""Random streams, weighted index sampling and block rejection sampling.

Stream contract shared by every randomized routine in the package: a round
of block size b draws b uniforms for its proposals (inverse CDF), and the
rejection-sampling routines then draw exactly b more uniforms for the
accept/reject sweep, whether or not an entry could be accepted.  Two
implementations that follow the contract see the same numbers.
"""
from __future__ import annotations

import numpy as np

__all__ = ["make_rng", "zero_floor", "sample_from_weights", "rejection_sample_submatrix"]

EPS = np.finfo(np.float64).eps


def make_rng(seed=None) -> np.random.Generator:
    """Counter-based Philox stream; Generators are passed through untouched."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def zero_floor(diag) -> float:
    """Residual diagonal values at or below this level are roundoff and count as 0."""
    diag = np.asarray(diag)
    return 64.0 * EPS * float(diag.max()) if diag.size else 0.0


def sample_from_weights(weights: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """Map uniforms in [0, 1) to indices with P(j) = weights[j] / sum(weights).

    Zero-weight indices are never returned.
    """
    cum = np.cumsum(weights)
    total = cum[-1]
    if not total > 0:
        raise ValueError("all sampling weights are zero")
    idx = np.searchsorted(cum, np.asarray(uniforms) * total, side="right")
    # u * total can round up to total itself
    last = int(np.flatnonzero(weights > 0)[-1])
    return np.minimum(idx, last)


def rejection_sample_submatrix(H, proposals, rng, floor=0.0):
    """Thin a block of proposals by sequential accept/reject with Cholesky updates.

    Parameters
    ----------
    H : (b, b) array
        Residual matrix restricted to the proposals, in proposal order.
    proposals : (b,) int array
        Proposed pivot indices.
    rng : Generator or (b,) array
        Source of the b accept/reject uniforms, consumed in sweep order.
    floor : float
        Pivots whose current residual diagonal is at most ``floor`` are rejected;
        they are zero up to roundoff.

    Returns
    -------
    accepted : int array
        Accepted entries of ``proposals``, in sweep order.
    L : (m, m) array
        Lower Cholesky factor of the accepted principal submatrix of ``H``.
    """
    H = np.array(H, dtype=np.float64, order="F")
    b = H.shape[0]
    if H.shape != (b, b):
        raise ValueError("H must be square")
    proposals = np.asarray(proposals, dtype=np.intp)
    if proposals.shape != (b,):
        raise ValueError("need one proposal per row of H")
    if isinstance(rng, np.random.Generator):
        uniforms = rng.random(b)
    else:
        uniforms = np.asarray(rng, dtype=np.float64)
        if uniforms.shape != (b,):
            raise ValueError("need exactly one uniform per proposal")
    u = np.diag(H).copy()
    L = np.zeros((b, b), order="F")
    keep = []
    for i in range(b):
        hii = H[i, i]
        if u[i] * uniforms[i] < hii and hii > floor:
            keep.append(i)
            col = H[i:, i] / np.sqrt(hii)
            L[i:, i] = col
            if i + 1 < b:
                tail = col[1:]
                H[i + 1:, i + 1:] -= np.outer(tail, tail)
    keep = np.asarray(keep, dtype=np.intp)
    return proposals[keep], L[keep[:, None], keep]
