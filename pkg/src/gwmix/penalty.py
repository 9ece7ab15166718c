"""Reference precisions and group-wise penalty weight matrices."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from sklearn.cluster import KMeans
from sklearn.mixture import GaussianMixture

from .glasso import GlassoOptions, weighted_glasso
from .spd import MetricKind, spd_distance

__all__ = [
    "PenaltyStrategy",
    "ReferencePrecisions",
    "PenaltyPlan",
    "DegeneratePartitionError",
    "initial_partition",
    "init_reference_precisions",
    "build_penalty_matrices",
    "make_plan",
]

EPSILON_GUARD = 1e-8


class DegeneratePartitionError(ValueError):
    """A class or cluster is too small to estimate its covariance."""


class PenaltyStrategy(str, enum.Enum):
    """How the per-component weight matrices are derived.

    The values double as the command-line names.
    """

    ALL_ONES = "zhou"
    INVERSE_WEIGHT = "inverse"
    FROBENIUS_TO_DIAG = "frob-diag"
    RIEMANNIAN_TO_DIAG = "riem-diag"
    FROBENIUS_TO_IDENTITY = "frob-id"
    RIEMANNIAN_TO_IDENTITY = "riem-id"

    @property
    def metric(self):
        if self in (PenaltyStrategy.FROBENIUS_TO_DIAG, PenaltyStrategy.FROBENIUS_TO_IDENTITY):
            return MetricKind.FROBENIUS
        if self in (PenaltyStrategy.RIEMANNIAN_TO_DIAG, PenaltyStrategy.RIEMANNIAN_TO_IDENTITY):
            return MetricKind.RIEMANNIAN
        return None


@dataclass
class ReferencePrecisions:
    """Starting precision estimates, one per component.

    ``covariances`` and ``per_class_sizes`` are the per-group sample
    covariances and sizes they came from; ``partition`` holds the labels
    used (``-1`` for observations left out).
    """

    omegas0: list
    provenance: str
    per_class_sizes: list
    covariances: list
    from_glasso: list
    partition: np.ndarray

    @property
    def K(self):
        return len(self.omegas0)

    @property
    def any_glasso(self):
        return any(self.from_glasso)


@dataclass
class PenaltyPlan:
    strategy: PenaltyStrategy
    weights: list
    lam: float

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        p = {w.shape for w in self.weights}
        if len(p) > 1:
            raise ValueError("weight matrices must share one shape")


def initial_partition(X, K, method="kmeans", seed=0):
    """Hard partition of the rows of ``X`` into ``K`` groups.

    ``method`` is ``"kmeans"`` (10 seeded restarts) or ``"gmm-diag"`` (a
    diagonal-covariance Gaussian mixture, 10 seeded restarts).
    """
    X = np.asarray(X, dtype=float)
    if K < 1:
        raise ValueError("K must be at least 1")
    if len(X) < K:
        raise ValueError("need at least K observations")
    if K == 1:
        return np.zeros(len(X), dtype=int)
    if method == "kmeans":
        model = KMeans(n_clusters=K, n_init=10, random_state=seed)
    elif method == "gmm-diag":
        model = GaussianMixture(n_components=K, covariance_type="diag", n_init=10,
                                random_state=seed, reg_covar=1e-6)
    else:
        raise ValueError(f"unknown initializer {method!r}")
    labels = model.fit_predict(X)
    # canonical order: clusters numbered by first appearance
    _, first = np.unique(labels, return_index=True)
    order = np.argsort(first)
    relabel = np.empty(K, dtype=int)
    relabel[np.unique(labels)[order]] = np.arange(len(order))
    return relabel[labels]


def _class_covariance(Xk):
    mu = Xk.mean(axis=0)
    D = Xk - mu
    return D.T @ D / len(Xk)


def _reference_for_class(S, m, p, glasso_opts):
    if m > p:
        try:
            L = np.linalg.cholesky(S)
            piv = np.diag(L)
            if (piv.max() / piv.min()) ** 2 < 1e12:
                inv = np.linalg.inv(S)
                return 0.5 * (inv + inv.T), False
        except np.linalg.LinAlgError:
            pass
    lam0 = np.sqrt(np.log(p) / m) if p > 1 else 0.0
    R = np.full((p, p), lam0)
    np.fill_diagonal(R, 0.0)
    Sg = S.copy()
    # constant columns would give a zero diagonal
    d = np.diag(Sg).copy()
    d[d <= 0] = 1e-8
    np.fill_diagonal(Sg, d)
    return weighted_glasso(Sg, R, glasso_opts).omega, True


def init_reference_precisions(X, K, labels=None, method="kmeans", seed=0, glasso_opts=None):
    """Per-group starting precision matrices.

    Parameters
    ----------
    X : (n, p) array
    K : int
    labels : (n,) int array, optional
        Known class labels in ``0..K-1``; ``-1`` marks unlabeled rows. When
        omitted, an initial partition is computed with ``method``.

    Groups with more members than variables use the inverse sample
    covariance; smaller (or numerically singular) groups fall back to a
    graphical lasso with uniform penalty ``sqrt(log p / m_k)``.
    """
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    if K < 1:
        raise ValueError("K must be at least 1")
    if n < K:
        raise ValueError("need at least K observations")
    if labels is None:
        part = initial_partition(X, K, method=method, seed=seed)
        provenance = "initial-partition"
    else:
        part = np.asarray(labels, dtype=int)
        if part.shape != (n,):
            raise ValueError("labels must have one entry per row of X")
        if part.max() >= K or part.min() < -1:
            raise ValueError(f"labels must lie in -1..{K - 1}")
        provenance = "labeled-subsets"
    glasso_opts = glasso_opts or GlassoOptions()
    omegas, sizes, covs, flags = [], [], [], []
    for k in range(K):
        Xk = X[part == k]
        m = len(Xk)
        if m < 2:
            raise DegeneratePartitionError(f"group {k} has {m} member(s); need at least 2")
        S = _class_covariance(Xk)
        om, used_glasso = _reference_for_class(S, m, p, glasso_opts)
        omegas.append(om)
        sizes.append(m)
        covs.append(S)
        flags.append(used_glasso)
    return ReferencePrecisions(omegas0=omegas, provenance=provenance, per_class_sizes=sizes,
                               covariances=covs, from_glasso=flags, partition=part)


def build_penalty_matrices(ref, strategy, epsilon_guard=EPSILON_GUARD):
    """Weight matrices ``P_k`` for the given strategy, zero on the diagonal.

    ``inverse`` uses ``1 / (|omega0_ij| + eps)``, where ``eps`` is
    ``epsilon_guard`` if any reference came from the graphical lasso and 0
    otherwise (exact zeros then map to ``inf``). Distance strategies fill
    the off-diagonal with ``1 / max(D, epsilon_guard)``, ``D`` being the
    distance from the reference to its own diagonal or to the identity.
    """
    strategy = PenaltyStrategy(strategy)
    if epsilon_guard <= 0:
        raise ValueError("epsilon_guard must be positive")
    omegas = ref.omegas0 if isinstance(ref, ReferencePrecisions) else list(ref)
    any_glasso = ref.any_glasso if isinstance(ref, ReferencePrecisions) else False
    shapes = {np.shape(o) for o in omegas}
    if len(shapes) != 1:
        raise ValueError("reference precisions must share one dimension")
    out = []
    for om in omegas:
        om = np.asarray(om, dtype=float)
        if not np.allclose(om, om.T, rtol=0, atol=1e-10 * max(1.0, np.abs(om).max())):
            raise ValueError("reference precision is not symmetric")
        p = om.shape[0]
        if strategy is PenaltyStrategy.ALL_ONES:
            P = np.ones((p, p))
        elif strategy is PenaltyStrategy.INVERSE_WEIGHT:
            eps = epsilon_guard if any_glasso else 0.0
            with np.errstate(divide="ignore"):
                P = 1.0 / (np.abs(om) + eps)
        else:
            target = np.diag(np.diag(om)) if strategy in (
                PenaltyStrategy.FROBENIUS_TO_DIAG, PenaltyStrategy.RIEMANNIAN_TO_DIAG) else np.eye(p)
            D = spd_distance(om, target, strategy.metric)
            P = np.full((p, p), 1.0 / max(D, epsilon_guard))
        np.fill_diagonal(P, 0.0)
        out.append(P)
    return out


def make_plan(ref, strategy, lam, epsilon_guard=EPSILON_GUARD):
    return PenaltyPlan(strategy=PenaltyStrategy(strategy),
                       weights=build_penalty_matrices(ref, strategy, epsilon_guard), lam=float(lam))
