"""Penalized EM for Gaussian mixtures with group-wise weighted precision penalties.

The objective maximized for fixed ``K`` and ``lam`` is

    sum_i log sum_k pi_k phi(x_i; mu_k, Omega_k) - lam * sum_k ||P_k * Omega_k||_1

with ``P_k`` the weight matrices of a :class:`~gwmix.penalty.PenaltyPlan`.
"""
from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import logsumexp

from .glasso import GlassoOptions, weighted_glasso, ZERO_TOL
from .penalty import (
    PenaltyStrategy,
    ReferencePrecisions,
    init_reference_precisions,
    make_plan,
)

__all__ = [
    "ModelParams",
    "FitConfig",
    "FitReport",
    "SearchEntry",
    "SearchResult",
    "DegenerateComponentError",
    "SearchError",
    "log_component_densities",
    "e_step",
    "m_step",
    "penalty_value",
    "penalized_loglik",
    "fit",
    "classify",
    "count_d0",
    "bic",
    "lambda_upper_bound",
    "lambda_grid",
    "model_search",
]

logger = logging.getLogger(__name__)

_LOG_2PI = np.log(2 * np.pi)


class DegenerateComponentError(RuntimeError):
    """A component lost too much mass to estimate its covariance."""

    def __init__(self, message, component=None, iteration=None):
        super().__init__(message)
        self.component = component
        self.iteration = iteration


class SearchError(RuntimeError):
    """Every candidate of a model search failed."""


@dataclass
class ModelParams:
    pi: np.ndarray
    mu: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        self.pi = np.asarray(self.pi, dtype=float)
        self.mu = np.atleast_2d(np.asarray(self.mu, dtype=float))
        self.omega = np.asarray(self.omega, dtype=float)
        if self.omega.ndim == 2:
            self.omega = self.omega[None]
        K, p = self.mu.shape
        if self.pi.shape != (K,) or self.omega.shape != (K, p, p):
            raise ValueError(f"inconsistent shapes: pi {self.pi.shape}, mu {self.mu.shape}, "
                             f"omega {self.omega.shape}")

    @property
    def K(self):
        return len(self.pi)

    @property
    def p(self):
        return self.mu.shape[1]

    def permuted(self, order):
        order = np.asarray(order)
        return ModelParams(self.pi[order], self.mu[order], self.omega[order])


@dataclass(frozen=True)
class FitConfig:
    em_tolerance: float = 1e-5
    em_max_iterations: int = 500
    glasso_options: GlassoOptions = field(default_factory=GlassoOptions)
    seed: int = 0
    # ``None`` means p + 1 for unpenalized fits and 2 otherwise.
    min_effective_size: float | None = None
    init_method: str = "kmeans"
    epsilon_guard: float = 1e-8
    keep_history: bool = False

    def __post_init__(self):
        if self.em_tolerance <= 0:
            raise ValueError("em_tolerance must be positive")
        if self.em_max_iterations < 1:
            raise ValueError("em_max_iterations must be at least 1")


@dataclass
class FitReport:
    params: ModelParams
    responsibilities: np.ndarray
    penalized_loglik: float
    unpenalized_loglik: float
    bic: float
    d0: int
    iterations: int
    converged: bool
    lam: float
    strategy: PenaltyStrategy
    trace: list
    n: int
    history: list = field(default_factory=list)
    covariances: list = field(default_factory=list)
    penalties: list = field(default_factory=list)

    @property
    def K(self):
        return self.params.K

    @property
    def labels(self):
        return np.argmax(self.responsibilities, axis=1)


# --------------------------------------------------------------------------
# E-step


def log_component_densities(X, params):
    """``(n, K)`` matrix of ``log pi_k + log phi(x_i; mu_k, Omega_k)``."""
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    if p != params.p:
        raise ValueError(f"data have {p} columns, model has {params.p}")
    out = np.empty((n, params.K))
    for k in range(params.K):
        try:
            L = np.linalg.cholesky(params.omega[k])
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError(f"precision of component {k} is not positive definite") from exc
        logdet = 2.0 * np.sum(np.log(np.diag(L)))
        q = (X - params.mu[k]) @ L
        with np.errstate(over="ignore"):  # e_step reports rows that underflow
            out[:, k] = (np.log(params.pi[k]) + 0.5 * logdet - 0.5 * p * _LOG_2PI
                         - 0.5 * np.sum(q * q, axis=1))
    return out


def e_step(X, params):
    """Posterior membership probabilities and the mixture log-likelihood."""
    logd = log_component_densities(X, params)
    norm = logsumexp(logd, axis=1)
    bad = np.flatnonzero(~np.isfinite(norm))
    if bad.size:
        raise FloatingPointError(f"all component densities underflow for row {bad[0]}")
    zhat = np.exp(logd - norm[:, None])
    return zhat, float(norm.sum())


def classify(X, params):
    """MAP labels; ties go to the lowest component index."""
    return np.argmax(log_component_densities(X, params), axis=1)


# --------------------------------------------------------------------------
# M-step


def _scaled_penalty(P, lam, n_k):
    # 0 * inf would give nan; with lam == 0 the entry is unpenalized.
    if lam == 0:
        return np.zeros_like(P)
    return (2.0 * lam / n_k) * P


def m_step(X, zhat, plan, opts=None, warm=None, min_effective_size=None,
           return_details=False):
    """Update proportions, means and precisions given responsibilities.

    Each precision solves a weighted graphical lasso on the weighted
    covariance ``S_k`` with penalty ``(2 lam / n_k) P_k``.

    Parameters
    ----------
    warm : ModelParams, optional
        Previous iterate used to warm-start the graphical lasso.
    min_effective_size : float, optional
        Smallest admissible ``n_k``; defaults to ``p + 1`` when
        ``plan.lam == 0`` and 2 otherwise.
    """
    X = np.asarray(X, dtype=float)
    zhat = np.asarray(zhat, dtype=float)
    n, p = X.shape
    K = zhat.shape[1]
    opts = opts or GlassoOptions()
    if min_effective_size is None:
        min_effective_size = p + 1 if plan.lam == 0 else 2
    nk = zhat.sum(axis=0)
    for k in range(K):
        if not nk[k] >= min_effective_size:
            raise DegenerateComponentError(
                f"component {k} has effective size {nk[k]:.3g} < {min_effective_size:g}", component=k)
    pi = nk / nk.sum()
    # elementwise weighting keeps unit-weight means identical to X.mean
    mu = np.stack([(zhat[:, k:k + 1] * X).sum(axis=0) / nk[k] for k in range(K)])
    omegas = np.empty((K, p, p))
    covs, pens = [], []
    for k in range(K):
        D = X - mu[k]
        S = (D * zhat[:, k:k + 1]).T @ D / nk[k]
        S = 0.5 * (S + S.T)
        if np.any(np.diag(S) <= 0):
            raise DegenerateComponentError(f"component {k} has a zero-variance direction", component=k)
        R = _scaled_penalty(plan.weights[k], plan.lam, nk[k])
        o = opts
        if warm is not None:
            try:
                o = replace(opts, warm_start=(warm.omega[k], np.linalg.inv(warm.omega[k])))
            except np.linalg.LinAlgError:
                o = opts
        omegas[k] = weighted_glasso(S, R, o).omega
        covs.append(S)
        pens.append(R)
    params = ModelParams(pi, mu, omegas)
    if return_details:
        return params, covs, pens
    return params


# --------------------------------------------------------------------------
# objective and model selection criteria


def penalty_value(params, plan):
    """``sum_k ||P_k * Omega_k||_1``; zero entries contribute nothing."""
    total = 0.0
    for P, om in zip(plan.weights, params.omega):
        nz = om != 0
        total += float(np.sum(P[nz] * np.abs(om[nz])))
    return total


def penalized_loglik(X, params, plan):
    _, ll = e_step(X, params)
    return ll - plan.lam * penalty_value(params, plan)


def count_d0(params, zero_tol=ZERO_TOL):
    """Parameters not shrunk to zero: proportions, means, precision diagonals
    and surviving off-diagonal precision entries."""
    K, p = params.K, params.p
    iu = np.triu_indices(p, 1)
    offdiag = sum(int(np.sum(np.abs(om[iu]) > zero_tol)) for om in params.omega)
    return (K - 1) + K * p + K * p + offdiag


def bic(report, n=None):
    """``2 loglik - d0 log n``; larger is better."""
    n = report.n if n is None else n
    return 2.0 * report.unpenalized_loglik - report.d0 * np.log(n)


def lambda_upper_bound(covariances, sizes):
    """``max_k max_ij |S_k - I|_ij * n_k / 2``."""
    ub = 0.0
    for S, m in zip(covariances, sizes):
        S = np.asarray(S, dtype=float)
        ub = max(ub, float(np.max(np.abs(S - np.eye(S.shape[0])))) * m / 2.0)
    return ub


def lambda_grid(X, partition, n_points=100):
    """Equispaced penalties from 0 to :func:`lambda_upper_bound`.

    ``partition`` is either a label vector (``-1`` entries ignored) or a
    :class:`~gwmix.penalty.ReferencePrecisions`.
    """
    if isinstance(partition, ReferencePrecisions):
        covs, sizes = partition.covariances, partition.per_class_sizes
    else:
        X = np.asarray(X, dtype=float)
        labels = np.asarray(partition, dtype=int)
        covs, sizes = [], []
        for k in np.unique(labels[labels >= 0]):
            Xk = X[labels == k]
            if len(Xk) < 2:
                raise ValueError(f"group {k} has fewer than two members")
            D = Xk - Xk.mean(axis=0)
            covs.append(D.T @ D / len(Xk))
            sizes.append(len(Xk))
    if n_points < 1:
        raise ValueError("n_points must be at least 1")
    return np.linspace(0.0, lambda_upper_bound(covs, sizes), n_points)


# --------------------------------------------------------------------------
# EM driver


def _hard_responsibilities(partition, K):
    z = np.zeros((len(partition), K))
    rows = np.flatnonzero(partition >= 0)
    z[rows, partition[rows]] = 1.0
    return z


def fit(X, K, lam, strategy=PenaltyStrategy.ALL_ONES, config=None, init=None, labels=None):
    """Fit the penalized mixture for fixed ``K`` and ``lam``.

    Parameters
    ----------
    X : (n, p) array
    K : int
    lam : float
        Common penalty level.
    strategy : PenaltyStrategy or str
    config : FitConfig, optional
    init : ReferencePrecisions, optional
        Precomputed references; built from ``labels`` or an initial
        clustering when omitted. The EM starts from the same partition.
    labels : (n,) int array, optional
        Known labels (``-1`` for unknown) used only for the references and
        the starting point.

    Returns
    -------
    FitReport
    """
    X = np.asarray(X, dtype=float)
    config = config or FitConfig()
    strategy = PenaltyStrategy(strategy)
    n, p = X.shape
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if n <= K:
        raise ValueError("need more observations than components")
    if init is None:
        init = init_reference_precisions(X, K, labels=labels, method=config.init_method,
                                         seed=config.seed, glasso_opts=config.glasso_options)
    if init.K != K:
        raise ValueError(f"references have {init.K} components, expected {K}")
    plan = make_plan(init, strategy, lam, config.epsilon_guard)
    opts = config.glasso_options
    mes = config.min_effective_size

    def step(z, warm, it):
        try:
            return m_step(X, z, plan, opts, warm=warm, min_effective_size=mes, return_details=True)
        except DegenerateComponentError as exc:
            exc.iteration = it
            raise DegenerateComponentError(f"{exc} (iteration {it})", exc.component, it) from exc

    params, covs, pens = step(_hard_responsibilities(init.partition, K), None, 0)
    zhat, ll = e_step(X, params)
    obj = ll - lam * penalty_value(params, plan)
    trace = [obj]
    history = [params] if config.keep_history else []
    converged = False
    it = 0
    for it in range(1, config.em_max_iterations + 1):
        params, covs, pens = step(zhat, params, it)
        zhat, ll = e_step(X, params)
        new = ll - lam * penalty_value(params, plan)
        trace.append(new)
        if config.keep_history:
            history.append(params)
        if abs(new - obj) < config.em_tolerance * abs(obj):
            converged = True
            break
        obj = new
    report = FitReport(params=params, responsibilities=zhat, penalized_loglik=trace[-1],
                       unpenalized_loglik=ll, bic=float("nan"), d0=count_d0(params),
                       iterations=it, converged=converged, lam=float(lam), strategy=strategy,
                       trace=trace, n=n, history=history, covariances=covs, penalties=pens)
    report.bic = bic(report)
    return report


# --------------------------------------------------------------------------
# (K, lambda) search


@dataclass
class SearchEntry:
    K: int
    lam: float
    grid_index: int
    report: FitReport | None
    error: str | None = None

    @property
    def bic(self):
        return self.report.bic if self.report is not None else float("nan")


@dataclass
class SearchResult:
    best: FitReport
    table: list
    references: dict


def _fit_task(args):
    X, K, lam, idx, strategy, config, ref = args
    try:
        rep = fit(X, K, lam, strategy, config, init=ref)
        rep.history = []
        return SearchEntry(K, float(lam), idx, rep)
    except (DegenerateComponentError, np.linalg.LinAlgError, FloatingPointError) as exc:
        return SearchEntry(K, float(lam), idx, None, f"{type(exc).__name__}: {exc}")


def default_jobs():
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def model_search(X, K_candidates, strategy=PenaltyStrategy.ALL_ONES, config=None,
                 n_grid=100, grids=None, jobs=1, references=None):
    """Fit every ``(K, lambda)`` pair and keep the largest-BIC model.

    Parameters
    ----------
    K_candidates : iterable of int
    n_grid : int
        Size of the per-``K`` penalty grid from :func:`lambda_grid`.
    grids : dict, optional
        Explicit ``{K: lambdas}`` overriding the computed grids.
    jobs : int
        Worker processes; results do not depend on this.
    references : dict, optional
        Precomputed ``{K: ReferencePrecisions}``.

    Returns
    -------
    SearchResult
        ``table`` lists every candidate, sorted by ``(K, grid_index)``,
        with failures recorded in ``error``.
    """
    X = np.asarray(X, dtype=float)
    config = config or FitConfig()
    strategy = PenaltyStrategy(strategy)
    refs = dict(references or {})
    tasks = []
    table = []
    for K in sorted(set(int(k) for k in K_candidates)):
        if K not in refs:
            try:
                refs[K] = init_reference_precisions(X, K, method=config.init_method, seed=config.seed,
                                                    glasso_opts=config.glasso_options)
            except ValueError as exc:
                table.append(SearchEntry(K, float("nan"), -1, None, f"{type(exc).__name__}: {exc}"))
                continue
        lams = grids[K] if grids is not None and K in grids else lambda_grid(X, refs[K], n_grid)
        for i, lam in enumerate(lams):
            tasks.append((X, K, float(lam), i, strategy, config, refs[K]))
    if jobs is None or jobs <= 0:
        jobs = default_jobs()
    if jobs == 1 or len(tasks) <= 1:
        table.extend(_fit_task(t) for t in tasks)
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            table.extend(pool.map(_fit_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    table.sort(key=lambda e: (e.K, e.grid_index))
    ok = [e for e in table if e.report is not None and np.isfinite(e.report.bic)]
    for e in table:
        if e.error:
            logger.info("K=%d lambda=%g failed: %s", e.K, e.lam, e.error)
    if not ok:
        raise SearchError("all candidate fits failed")
    best = max(ok, key=lambda e: e.report.bic)  # first maximum in sorted order
    return SearchResult(best=best.report, table=table, references=refs)
