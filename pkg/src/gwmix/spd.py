"""Dense symmetric positive-definite matrix utilities.

Matrices are plain ``numpy.ndarray`` objects of shape ``(p, p)``; the
functions here never mutate their inputs.
"""
from __future__ import annotations

import enum
import warnings

import numpy as np
import scipy.linalg

__all__ = [
    "MetricKind",
    "symmetrize",
    "cholesky_logdet",
    "is_pd",
    "invert_spd",
    "spd_distance",
]

# Pivot ratio above which inversion emits an ill-conditioning warning.
CONDITION_WARN = 1e12


class MetricKind(str, enum.Enum):
    FROBENIUS = "frobenius"
    RIEMANNIAN = "riemannian"


def _as_square(M, name="M"):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    return M


def symmetrize(M):
    """Return the symmetric part ``(M + M.T) / 2``."""
    M = np.asarray(M, dtype=float)
    return 0.5 * (M + M.T)


def cholesky_logdet(M):
    """Log-determinant through a Cholesky factorization.

    Returns
    -------
    log_det : float
        ``log det(M)`` when ``M`` is positive definite, ``nan`` otherwise.
    is_pd : bool
        Whether the factorization succeeded.
    """
    M = _as_square(M)
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        return float("nan"), False
    d = np.diag(L)
    if np.any(d <= 0):
        return float("nan"), False
    return float(2.0 * np.sum(np.log(d))), True


def is_pd(M):
    return cholesky_logdet(M)[1]


def invert_spd(M):
    """Invert a positive-definite matrix via its Cholesky factor.

    Raises ``numpy.linalg.LinAlgError`` if ``M`` is not positive definite.
    A ``RuntimeWarning`` is issued when the squared pivot ratio exceeds
    ``CONDITION_WARN``.
    """
    M = _as_square(M)
    try:
        c, lower = scipy.linalg.cho_factor(M, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"matrix is not positive definite: {exc}") from exc
    piv = np.abs(np.diag(c))
    if piv.min() <= 0:
        raise np.linalg.LinAlgError("matrix is not positive definite")
    if (piv.max() / piv.min()) ** 2 > CONDITION_WARN:
        warnings.warn("inverting an ill-conditioned matrix", RuntimeWarning, stacklevel=2)
    inv = scipy.linalg.cho_solve((c, lower), np.eye(M.shape[0]), check_finite=False)
    return symmetrize(inv)


def spd_distance(A, B, metric=MetricKind.FROBENIUS):
    """Distance between two symmetric matrices.

    ``frobenius`` is the entrywise Euclidean norm of ``A - B``.
    ``riemannian`` is the affine-invariant distance
    ``sqrt(sum(log(l_i)**2))`` over the generalized eigenvalues ``l_i`` of
    the pencil ``(A, B)``; both arguments must be positive definite.
    """
    A = _as_square(A, "A")
    B = _as_square(B, "B")
    if A.shape != B.shape:
        raise ValueError(f"dimension mismatch: {A.shape} vs {B.shape}")
    metric = MetricKind(metric)
    if metric is MetricKind.FROBENIUS:
        return float(np.linalg.norm(A - B, "fro"))
    if not (is_pd(A) and is_pd(B)):
        raise np.linalg.LinAlgError("riemannian distance needs positive-definite inputs")
    lam = scipy.linalg.eigh(symmetrize(A), symmetrize(B), eigvals_only=True)
    if np.any(lam <= 0):
        raise np.linalg.LinAlgError("non-positive generalized eigenvalue")
    return float(np.sqrt(np.sum(np.log(lam) ** 2)))
