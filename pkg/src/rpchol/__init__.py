"""Randomly pivoted Cholesky and QR for low-rank psd approximation.

The main entry points are :func:`accelerated_rpcholesky` and its low-memory
variant, the block and sequential baselines, randomly pivoted QR, a KRR
solver preconditioned with the resulting factors, and evaluators for the
error bounds.
"""
from .bounds import (
    BoundQuery,
    BoundReport,
    Spectrum,
    drvw_sufficient_rounds,
    phi,
    phi_matrix_diag,
    sufficient_pivots_simple,
    sufficient_proposals_block,
    two_cluster_spectrum,
    worst_case_recursion,
)
from .cholesky import (
    LowRankApprox,
    NumericalError,
    PivotTrace,
    RunConfig,
    accelerated_rpcholesky,
    block_rpcholesky,
    partial_cholesky,
    rbrp_cholesky,
    relative_trace_error,
    simple_rpcholesky,
)
from .kernels import DataMatrix, DenseOracle, DistanceMode, KernelKind, KernelOracle, KernelSpec, PsdOracle
from .krr import fit_krr, pcg_solve, predict
from .lowmem import accelerated_rpcholesky_lowmem
from .qr import accelerated_rp_qr, pivoted_qr, qr_cholesky_crosscheck, rp_qr
from .sampling import rejection_sample_submatrix

__version__ = "0.1.0"
