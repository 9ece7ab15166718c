"""Edge recovery, partition agreement and precision-distance metrics.

Labels are 0-based integer arrays throughout.
"""
from __future__ import annotations

import warnings
from fractions import Fraction
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .glasso import ZERO_TOL

__all__ = [
    "EdgeRecoveryReport",
    "ComponentMatching",
    "edge_f1",
    "edge_recovery",
    "ari",
    "contingency_table",
    "match_components",
    "empirical_precisions",
    "median_frobenius_distance",
    "count_precision_params",
]


@dataclass
class EdgeRecoveryReport:
    per_component: list
    mean_f1: float


@dataclass
class ComponentMatching:
    """Optimal pairing of true classes with estimated components.

    ``permutation[k]`` is the estimated component matched to true class
    ``k`` (``-1`` when there are fewer estimated components than classes).
    ``contingency[k, j]`` counts points of true class ``k`` assigned to
    estimated component ``j``.
    """

    permutation: np.ndarray
    contingency: np.ndarray

    @property
    def est_to_true(self):
        out = np.full(self.contingency.shape[1], -1)
        for k, j in enumerate(self.permutation):
            if j >= 0:
                out[j] = k
        return out

    @property
    def matched_total(self):
        return int(sum(self.contingency[k, j] for k, j in enumerate(self.permutation) if j >= 0))


def _edges(omega, zero_tol):
    omega = np.asarray(omega)
    iu = np.triu_indices(omega.shape[0], 1)
    return np.abs(omega[iu]) > zero_tol


def edge_f1(omega_true, omega_hat, zero_tol=ZERO_TOL):
    """Edge-recovery counts and F1 score between two precision matrices.

    Returns ``(tp, fp, fn, f1)``. Two empty graphs score ``f1 = 1``.
    """
    omega_true = np.asarray(omega_true)
    omega_hat = np.asarray(omega_hat)
    if omega_true.shape != omega_hat.shape:
        raise ValueError(f"dimension mismatch: {omega_true.shape} vs {omega_hat.shape}")
    t = _edges(omega_true, zero_tol)
    h = _edges(omega_hat, zero_tol)
    tp = int(np.sum(t & h))
    fp = int(np.sum(h & ~t))
    fn = int(np.sum(t & ~h))
    return tp, fp, fn, f1_from_counts(tp, fp, fn)


def f1_from_counts(tp, fp, fn):
    if tp == fp == fn == 0:
        return 1.0
    return tp / (tp + 0.5 * (fp + fn))


def edge_recovery(omegas_true, omegas_hat, matching=None, zero_tol=ZERO_TOL):
    """Per-class F1 after matching estimated components to true classes.

    A true class with no matched component is scored against an empty graph.
    """
    per = []
    p = np.asarray(omegas_true[0]).shape[0]
    for k, om in enumerate(omegas_true):
        j = k if matching is None else int(matching.permutation[k])
        est = omegas_hat[j] if 0 <= j < len(omegas_hat) else np.eye(p)
        per.append(edge_f1(om, est, zero_tol))
    return EdgeRecoveryReport(per_component=per, mean_f1=float(np.mean([r[3] for r in per])))


def contingency_table(a, b, n_a=None, n_b=None):
    a = np.asarray(a, dtype=int)
    b = np.asarray(b, dtype=int)
    n_a = a.max() + 1 if n_a is None else n_a
    n_b = b.max() + 1 if n_b is None else n_b
    table = np.zeros((n_a, n_b), dtype=np.int64)
    np.add.at(table, (a, b), 1)
    return table


def ari(a, b):
    """Adjusted Rand index (Hubert & Arabie) between two labelings."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("label vectors must be 1-d and of equal length")
    if len(a) < 2:
        raise ValueError("need at least two observations")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = contingency_table(ai, bi)
    # exact integer arithmetic, rounded once at the end
    pairs = lambda v: sum(int(x) * (int(x) - 1) // 2 for x in np.ravel(v))  # noqa: E731
    sum_cells = pairs(table)
    sum_rows = pairs(table.sum(axis=1))
    sum_cols = pairs(table.sum(axis=0))
    total = len(a) * (len(a) - 1) // 2
    num = 2 * (sum_cells * total - sum_rows * sum_cols)
    den = (sum_rows + sum_cols) * total - 2 * sum_rows * sum_cols
    if den == 0:
        # only reached when both partitions are all-one-cluster or all-singletons
        return 1.0
    return float(Fraction(num, den))


def match_components(true_labels, est_labels, K, K_est=None):
    """Match estimated components to true classes maximizing agreement.

    The optimal total is found with the Hungarian method; among optimal
    assignments the lexicographically smallest one (in true-class order)
    is returned.
    """
    true_labels = np.asarray(true_labels, dtype=int)
    est_labels = np.asarray(est_labels, dtype=int)
    K_est = K if K_est is None else K_est
    if true_labels.shape != est_labels.shape:
        raise ValueError("label vectors must have equal length")
    for name, lab, k in (("true", true_labels, K), ("estimated", est_labels, K_est)):
        if lab.size and (lab.min() < 0 or lab.max() >= k):
            raise ValueError(f"{name} label out of range 0..{k - 1}")
    table = contingency_table(true_labels, est_labels, K, K_est)

    def best(rows, cols):
        if not rows or not cols:
            return 0
        sub = table[np.ix_(rows, cols)]
        r, c = linear_sum_assignment(sub, maximize=True)
        return int(sub[r, c].sum())

    rows = list(range(K))
    cols = list(range(K_est))
    target = best(rows, cols)
    perm = np.full(K, -1)
    fixed = 0
    n_assign = min(K, K_est)
    for k in range(K):
        rest_rows = rows[k + 1:]
        options = [c for c in cols]
        # A true class may stay unmatched only when columns run out.
        if len(rest_rows) >= len(cols):
            options.append(-1)
        chosen = None
        for c in options:
            if c == -1:
                if fixed + best(rest_rows, cols) == target:
                    chosen = -1
                    break
                continue
            remaining = [x for x in cols if x != c]
            if fixed + table[k, c] + best(rest_rows, remaining) == target:
                chosen = c
                break
        assert chosen is not None
        perm[k] = chosen
        if chosen >= 0:
            fixed += table[k, chosen]
            cols = [x for x in cols if x != chosen]
    assert np.sum(perm >= 0) == n_assign
    return ComponentMatching(permutation=perm, contingency=table)


def empirical_precisions(X, labels, K):
    """Inverse MLE covariance of each labeled class, ``None`` where singular."""
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels, dtype=int)
    out = []
    for k in range(K):
        Xk = X[labels == k]
        if len(Xk) <= X.shape[1]:
            out.append(None)
            continue
        S = np.cov(Xk, rowvar=False, bias=True).reshape(X.shape[1], X.shape[1])
        try:
            np.linalg.cholesky(S)
            out.append(np.linalg.inv(S))
        except np.linalg.LinAlgError:
            out.append(None)
    return out


def median_frobenius_distance(omega_hat, omega_bar, matching=None):
    """Median over classes of ``||omega_hat[match(k)] - omega_bar[k]||_F``.

    Classes whose empirical precision is ``None`` (singular covariance) or
    that have no matched component are skipped with a warning. Returns
    ``nan`` if nothing remains.
    """
    dists = []
    skipped = 0
    for k, ob in enumerate(omega_bar):
        j = k if matching is None else int(matching.permutation[k])
        if ob is None or not 0 <= j < len(omega_hat):
            skipped += 1
            continue
        dists.append(np.linalg.norm(np.asarray(omega_hat[j]) - ob, "fro"))
    if skipped:
        warnings.warn(f"{skipped} class(es) excluded from the median Frobenius distance",
                      RuntimeWarning, stacklevel=2)
    if not dists:
        return float("nan")
    return float(np.median(dists))


def count_precision_params(omegas, zero_tol=ZERO_TOL):
    """Nonzero upper-triangular entries (diagonal included) over all matrices."""
    total = 0
    for om in omegas:
        om = np.asarray(om)
        iu = np.triu_indices(om.shape[0])
        total += int(np.sum(np.abs(om[iu]) > zero_tol))
    return total
