"""Smallest-singular-value solvers for dense complex matrices.

Scans evaluate sigma_min of the Birman-Schwinger matrix at hundreds of
spectral parameters; a full SVD at dimension 4N is far too slow for that.
Instead the matrix is LU-factorized once per parameter and the smallest
singular values are obtained by subspace (block inverse) iteration on
(A^H A)^{-1}, each step being two triangular solves.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import LinAlgError, lu_factor, lu_solve, qr, svd, svdvals

__all__ = ["sigma_min", "smallest_singular_values", "smallest_singular_triplets"]

# below this dimension a direct SVD is cheap enough
_DIRECT_SVD_DIM = 512
_MAX_ITER = 200
_RTOL = 1e-10


def _inverse_block_iteration(a: np.ndarray, n_values: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Smallest singular values/right vectors of ``a`` via block iteration.

    Returns (sigma, V) with sigma ascending, V of shape (dim, n_values).
    A singular (to machine precision) factor shows up as a solve overflow;
    that case is handled by the caller catching FloatingPointError.
    """
    dim = a.shape[0]
    block = min(dim, n_values + 2)
    lu = lu_factor(a, check_finite=False)
    v = rng.standard_normal((dim, block)) + 1j * rng.standard_normal((dim, block))
    v, _ = qr(v, mode="economic", check_finite=False)
    prev = None
    with np.errstate(over="raise", invalid="raise"):
        for _ in range(_MAX_ITER):
            w = lu_solve(lu, v, trans=2, check_finite=False)   # A^H w = v
            w = lu_solve(lu, w, trans=0, check_finite=False)   # A  u = w
            v, _ = qr(w, mode="economic", check_finite=False)
            # singular values of A restricted to the current subspace
            sig = svdvals(a @ v, check_finite=False)[::-1]
            if prev is not None and np.allclose(sig[:n_values], prev, rtol=_RTOL, atol=0.0):
                break
            prev = sig[:n_values].copy()
    small = svd(a @ v, full_matrices=False, check_finite=False)
    order = np.argsort(small[1])[:n_values]
    sigma = small[1][order]
    vectors = v @ small[2].conj().T[:, order]
    return sigma, vectors


def smallest_singular_triplets(a: np.ndarray, n_values: int = 1,
                               seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """The ``n_values`` smallest singular values and right singular vectors.

    Deterministic for a fixed seed.  Falls back to a full SVD when the matrix
    is small or the factorization-based iteration breaks down (numerically
    singular matrix -- exactly the interesting case for eigenvalue scans).
    """
    a = np.ascontiguousarray(a)
    dim = a.shape[0]
    if dim <= _DIRECT_SVD_DIM or n_values > dim // 4:
        _, s, vh = svd(a, check_finite=False)
        return s[::-1][:n_values].copy(), vh.conj().T[:, ::-1][:, :n_values].copy()
    rng = np.random.default_rng(seed)
    try:
        return _inverse_block_iteration(a, n_values, rng)
    except (FloatingPointError, LinAlgError, ValueError):
        _, s, vh = svd(a, check_finite=False)
        return s[::-1][:n_values].copy(), vh.conj().T[:, ::-1][:, :n_values].copy()


def smallest_singular_values(a: np.ndarray, n_values: int = 1, seed: int = 0) -> np.ndarray:
    return smallest_singular_triplets(a, n_values, seed)[0]


def sigma_min(a: np.ndarray, seed: int = 0) -> float:
    return float(smallest_singular_values(a, 1, seed)[0])
