"""Graphical lasso with an element-wise penalty matrix.

Solves

    maximize  log det(Omega) - tr(S Omega) - sum_ij R_ij |Omega_ij|

by block coordinate descent over the rows of the working covariance
``W = inv(Omega)``; each row subproblem is a lasso solved by cyclic
coordinate descent (Friedman, Hastie & Tibshirani, 2008).
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .spd import symmetrize

__all__ = [
    "GlassoOptions",
    "GlassoSolution",
    "weighted_glasso",
    "kkt_residual",
    "glasso_objective",
    "PENALTY_CAP_FACTOR",
    "ZERO_TOL",
]

# Effective penalties are capped at this multiple of max|S|; any larger
# value already forces the entry to zero.
PENALTY_CAP_FACTOR = 1e3
# Magnitudes below this are set to exact zero in the returned precision.
ZERO_TOL = 1e-12

_INNER_MAX_SWEEPS = 1000
_INNER_TOL = 1e-12


@dataclass(frozen=True)
class GlassoOptions:
    max_iterations: int = 200
    tolerance: float = 1e-4
    warm_start: tuple | None = None
    penalize_diagonal: bool = False

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


@dataclass
class GlassoSolution:
    omega: np.ndarray
    sigma: np.ndarray
    outer_sweeps: int
    converged: bool


@numba.njit(cache=True)
def _row_lasso(W, S, R, beta, j, p):
    # Cyclic coordinate descent for
    #   min 0.5 b'W11 b - b's12 + sum_a R[a, j] |b_a|
    # with W11 = W without row/col j. ``beta`` is updated in place and
    # w12 = W11 @ beta is returned.
    w12 = np.zeros(p)
    for a in range(p):
        if a == j:
            continue
        acc = 0.0
        for l in range(p):
            if l != j and beta[l] != 0.0:
                acc += W[a, l] * beta[l]
        w12[a] = acc
    for _ in range(_INNER_MAX_SWEEPS):
        dmax = 0.0
        for a in range(p):
            if a == j:
                continue
            waa = W[a, a]
            r = S[a, j] - w12[a] + waa * beta[a]
            lam = R[a, j]
            if r > lam:
                new = (r - lam) / waa
            elif r < -lam:
                new = (r + lam) / waa
            else:
                new = 0.0
            delta = new - beta[a]
            if delta != 0.0:
                beta[a] = new
                for l in range(p):
                    if l != j:
                        w12[l] += W[l, a] * delta
                ad = abs(delta) * waa
                if ad > dmax:
                    dmax = ad
        if dmax < _INNER_TOL:
            break
    return w12


@numba.njit(cache=True)
def _glasso_kernel(S, R, W, B, max_iter, threshold):
    p = S.shape[0]
    n_off = p * (p - 1)
    sweeps = 0
    converged = False
    for _ in range(max_iter):
        sweeps += 1
        change = 0.0
        for j in range(p):
            beta = B[:, j]
            w12 = _row_lasso(W, S, R, beta, j, p)
            for a in range(p):
                if a == j:
                    continue
                change += 2.0 * abs(w12[a] - W[a, j])
                W[a, j] = w12[a]
                W[j, a] = w12[a]
        if n_off == 0 or change / n_off < threshold:
            converged = True
            break
    omega = np.zeros((p, p))
    for j in range(p):
        acc = 0.0
        for a in range(p):
            if a != j:
                acc += W[a, j] * B[a, j]
        ojj = 1.0 / (W[j, j] - acc)
        omega[j, j] = ojj
        for a in range(p):
            if a != j:
                omega[a, j] = -B[a, j] * ojj
    return omega, sweeps, converged


def _check_inputs(S, R):
    S = np.asarray(S, dtype=float)
    R = np.asarray(R, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f"S must be square, got shape {S.shape}")
    if R.shape != S.shape:
        raise ValueError(f"dimension mismatch: S {S.shape} vs R {R.shape}")
    if not np.all(np.isfinite(S)):
        raise ValueError("S has non-finite entries")
    if np.any(np.isnan(R)) or np.any(R < 0):
        raise ValueError("penalty matrix must be entrywise nonnegative")
    if np.any(np.diag(S) <= 0):
        raise ValueError("degenerate input: S must have a strictly positive diagonal")
    return symmetrize(S), R


def effective_penalty(S, R):
    """Symmetrize ``R`` and cap it at ``PENALTY_CAP_FACTOR * max|S|``."""
    cap = PENALTY_CAP_FACTOR * np.max(np.abs(S))
    R = np.minimum(R, R.T)
    return np.minimum(R, cap)


def _cold_start(S, diag):
    # W = S is dual feasible and keeps every row update positive definite;
    # a singular S is shrunk toward its diagonal first.
    W = S.copy()
    np.fill_diagonal(W, diag)
    try:
        np.linalg.cholesky(W)
    except np.linalg.LinAlgError:
        W = 0.95 * S
        np.fill_diagonal(W, diag)
    p = S.shape[0]
    return np.ascontiguousarray(W), np.zeros((p, p), order="F")


def _warm_start(pair, diag):
    # The previous covariance with the new diagonal must stay positive
    # definite for the row updates to be well posed; otherwise start cold.
    omega0, sigma0 = (np.asarray(a, dtype=float) for a in pair)
    W = symmetrize(sigma0)
    np.fill_diagonal(W, diag)
    try:
        np.linalg.cholesky(W)
    except np.linalg.LinAlgError:
        return None
    if np.any(np.diag(omega0) <= 0):
        return None
    B = -omega0 / np.diag(omega0)[None, :]
    np.fill_diagonal(B, 0.0)
    return np.ascontiguousarray(W), np.asfortranarray(B)


def weighted_glasso(S, R, opts=None):
    """Solve the weighted graphical lasso problem.

    Parameters
    ----------
    S : (p, p) array
        Sample covariance; must have a strictly positive diagonal.
    R : (p, p) array
        Nonnegative penalty matrix. Entries may be ``inf``.
    opts : GlassoOptions, optional

    Returns
    -------
    GlassoSolution
        ``converged`` is False when ``max_iterations`` sweeps were used up;
        the last iterate is still returned.
    """
    opts = opts or GlassoOptions()
    S, R = _check_inputs(S, R)
    p = S.shape[0]
    R = effective_penalty(S, R)

    diag = np.diag(S).copy()
    if opts.penalize_diagonal:
        diag = diag + np.diag(R)

    off = ~np.eye(p, dtype=bool)
    mean_abs = np.abs(S[off]).mean() if p > 1 else 0.0
    threshold = opts.tolerance * mean_abs if mean_abs > 0 else 1e-10

    start = _warm_start(opts.warm_start, diag) if opts.warm_start is not None else None
    if start is not None:
        W, B = start
        omega, sweeps, converged = _glasso_kernel(S, R, W, B, opts.max_iterations, threshold)
        if not np.all(np.isfinite(omega)):
            start = None
    if start is None:
        W, B = _cold_start(S, diag)
        omega, sweeps, converged = _glasso_kernel(S, R, W, B, opts.max_iterations, threshold)
    omega = symmetrize(omega)
    omega[np.abs(omega) < ZERO_TOL] = 0.0
    return GlassoSolution(omega=omega, sigma=W, outer_sweeps=int(sweeps), converged=bool(converged))


def kkt_residual(S, omega, R):
    """Largest off-diagonal violation of the stationarity conditions.

    With ``Sigma = inv(omega)``, an entry with ``omega_ij == 0`` must satisfy
    ``|S_ij - Sigma_ij| <= R_ij`` and a nonzero entry must satisfy
    ``S_ij - Sigma_ij + R_ij sign(omega_ij) == 0``.
    """
    S = np.asarray(S, dtype=float)
    omega = np.asarray(omega, dtype=float)
    R = np.asarray(R, dtype=float)
    if not (S.shape == omega.shape == R.shape):
        raise ValueError(f"dimension mismatch: {S.shape}, {omega.shape}, {R.shape}")
    p = S.shape[0]
    if p < 2:
        return 0.0
    sigma = np.linalg.inv(omega)
    grad = S - sigma
    off = ~np.eye(p, dtype=bool)
    zero = (omega == 0) & off
    nonzero = (omega != 0) & off
    res = 0.0
    if zero.any():
        res = max(res, float(np.max(np.maximum(np.abs(grad[zero]) - R[zero], 0.0))))
    if nonzero.any():
        res = max(res, float(np.max(np.abs(grad[nonzero] + R[nonzero] * np.sign(omega[nonzero])))))
    return res


def glasso_objective(S, omega, R):
    """``log det(omega) - tr(S omega) - sum(R * |omega|)``; ``-inf`` if not PD."""
    omega = np.asarray(omega, dtype=float)
    sign, logdet = np.linalg.slogdet(omega)
    if sign <= 0:
        return -np.inf
    pen = np.where(omega != 0, np.asarray(R) * np.abs(omega), 0.0).sum()
    return float(logdet - np.sum(np.asarray(S) * omega) - pen)
