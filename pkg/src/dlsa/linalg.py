"""Small positive-definite solve helpers used by the master-side algebra."""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg

from .exceptions import IllConditionedSolve, NonPositiveDefinite

# a Cholesky pivot below PIVOT_RTOL * trace/q triggers the eigen fallback
PIVOT_RTOL = 1e-12


def psd_solve(A: np.ndarray, B: np.ndarray, *, context: str = "solve") -> np.ndarray:
    """Solve ``A X = B`` for symmetric positive definite ``A``.

    Uses a Cholesky factorization; when the smallest pivot is below
    ``PIVOT_RTOL * trace(A)/q`` the solve falls back to a symmetric-eigenvalue
    pseudo-inverse and emits :class:`IllConditionedSolve` instead of silently
    repairing the system.  A failed factorization raises
    :class:`NonPositiveDefinite`.
    """
    A = np.asarray(A, dtype=np.float64)
    q = A.shape[0]
    try:
        factor = scipy.linalg.cho_factor(A, lower=True)
    except scipy.linalg.LinAlgError:
        raise NonPositiveDefinite(f"{context}: matrix is not positive definite")
    pivots = np.diag(factor[0]) ** 2
    threshold = PIVOT_RTOL * np.trace(A) / q
    if np.min(pivots) < threshold:
        warnings.warn(
            f"{context}: smallest Cholesky pivot {np.min(pivots):.3e} below "
            f"{threshold:.3e}; using eigenvalue pseudo-solve",
            IllConditionedSolve,
        )
        vals, vecs = np.linalg.eigh(A)
        keep = vals > threshold
        inv_vals = np.where(keep, 1.0 / np.where(keep, vals, 1.0), 0.0)
        return vecs @ (inv_vals[:, None] * (vecs.T @ B))
    return scipy.linalg.cho_solve(factor, B)


def psd_inverse(A: np.ndarray, *, context: str = "invert") -> np.ndarray:
    """Inverse of a symmetric positive definite matrix, symmetrized."""
    inv = psd_solve(A, np.eye(A.shape[0]), context=context)
    return 0.5 * (inv + inv.T)


def cholesky_lower(A: np.ndarray, *, context: str = "factor") -> np.ndarray:
    """Lower Cholesky factor, raising :class:`NonPositiveDefinite` on failure."""
    try:
        return np.linalg.cholesky(np.asarray(A, dtype=np.float64))
    except np.linalg.LinAlgError:
        raise NonPositiveDefinite(f"{context}: matrix is not positive definite")
