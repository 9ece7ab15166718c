"""Synthetic Gaussian mixtures with Erdos-Renyi sparse precision matrices."""
from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

__all__ = [
    "SyntheticScenario",
    "GroundTruth",
    "SCENARIOS",
    "make_rng",
    "random_sparse_precision",
    "sample_mixture",
    "make_scenario",
    "motivating_scenario",
]

SCENARIOS = (
    "equal-edges",
    "diff-edges",
    "highdim-diff-edges",
    "zero-mean-diff-edges",
    "p-ge-n",
)


@dataclass
class SyntheticScenario:
    n: int
    p: int
    K: int
    pi: np.ndarray
    means: np.ndarray
    edge_probs: tuple
    seed: int
    name: str | None = None
    weight_range: tuple = (0.5, 1.0)
    margin: float = 0.1

    def __post_init__(self):
        self.pi = np.asarray(self.pi, dtype=float)
        self.means = np.asarray(self.means, dtype=float).reshape(self.K, self.p)
        self.edge_probs = tuple(float(q) for q in self.edge_probs)
        if len(self.pi) != self.K or len(self.edge_probs) != self.K:
            raise ValueError("pi and edge_probs need one entry per component")
        if np.any(self.pi < 0) or not np.isclose(self.pi.sum(), 1.0):
            raise ValueError("pi must lie on the probability simplex")
        if any(q < 0 or q > 1 for q in self.edge_probs):
            raise ValueError("edge probabilities must be in [0, 1]")

    def to_dict(self):
        d = asdict(self)
        d["pi"] = self.pi.tolist()
        d["means"] = self.means.tolist()
        d["edge_probs"] = list(self.edge_probs)
        d["weight_range"] = list(self.weight_range)
        return d


@dataclass
class GroundTruth:
    omegas: list
    labels: np.ndarray
    X: np.ndarray
    adjacency: list = field(default_factory=list)


def make_rng(seed, *stream):
    """Generator for ``seed`` and an optional sub-stream key.

    ``make_rng(s, b)`` gives replication ``b`` of master seed ``s`` a stream
    that does not depend on which other replications are run.
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, stream)]))


def random_sparse_precision(p, edge_prob, rng, weight_range=(0.5, 1.0), margin=0.1,
                            return_graph=False):
    """Draw a diagonally dominant precision matrix on a G(p, edge_prob) graph.

    Edge weights are uniform on ``[-hi, -lo] U [lo, hi]``; the diagonal is
    the absolute row sum of the off-diagonal part plus ``margin``.
    """
    if not 0 <= edge_prob <= 1:
        raise ValueError("edge_prob must be in [0, 1]")
    lo, hi = weight_range
    iu = np.triu_indices(p, 1)
    present = rng.random(len(iu[0])) < edge_prob
    mags = rng.uniform(lo, hi, size=len(iu[0]))
    signs = np.where(rng.random(len(iu[0])) < 0.5, -1.0, 1.0)
    omega = np.zeros((p, p))
    omega[iu] = np.where(present, signs * mags, 0.0)
    omega = omega + omega.T
    np.fill_diagonal(omega, np.abs(omega).sum(axis=1) + margin)
    if return_graph:
        adj = np.zeros((p, p), dtype=bool)
        adj[iu] = present
        return omega, adj | adj.T
    return omega


def sample_mixture(scenario, omegas, rng=None):
    """Draw labels and observations for ``scenario`` with the given precisions."""
    if rng is None:
        rng = make_rng(scenario.seed, 1)
    n, p, K = scenario.n, scenario.p, scenario.K
    if len(omegas) != K:
        raise ValueError("need one precision matrix per component")
    labels = rng.choice(K, size=n, p=scenario.pi)
    X = np.empty((n, p))
    for k in range(K):
        omega = np.asarray(omegas[k], dtype=float)
        if omega.shape != (p, p):
            raise ValueError(f"precision {k} has shape {omega.shape}, expected {(p, p)}")
        # X = mu + L^{-T} z has covariance inv(omega) when omega = L L^T.
        try:
            L = np.linalg.cholesky(omega)
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError(f"precision {k} is not positive definite") from exc
        idx = np.flatnonzero(labels == k)
        z = rng.standard_normal((p, len(idx)))
        X[idx] = scenario.means[k] + np.linalg.solve(L.T, z).T
    return GroundTruth(omegas=[np.asarray(o, dtype=float) for o in omegas], labels=labels, X=X)


def _scenario_config(name, p=None):
    if name == "equal-edges":
        p = 20
        ones = np.ones(p)
        return dict(n=1500, p=p, K=3, pi=np.full(3, 1 / 3),
                    means=[-1.5 * ones, 0 * ones, 1.5 * ones], edge_probs=(0.5, 0.5, 0.5))
    if name == "diff-edges":
        p = 20
        ones = np.ones(p)
        return dict(n=1500, p=p, K=3, pi=np.full(3, 1 / 3),
                    means=[-1.5 * ones, 0 * ones, 1.5 * ones], edge_probs=(0.1, 0.8, 0.4))
    if name == "highdim-diff-edges":
        p = 100
        ones = np.ones(p)
        return dict(n=1500, p=p, K=3, pi=np.full(3, 1 / 3),
                    means=[5 * ones, 0 * ones, 5 * ones], edge_probs=(0.1, 0.8, 0.4))
    if name == "zero-mean-diff-edges":
        p = 20
        return dict(n=1500, p=p, K=3, pi=np.full(3, 1 / 3),
                    means=np.zeros((3, p)), edge_probs=(0.1, 0.8, 0.4))
    if name == "p-ge-n":
        p = 100 if p is None else int(p)
        if p not in (100, 200):
            raise ValueError("p-ge-n scenario is defined for p in {100, 200}")
        ones = np.ones(p)
        return dict(n=100, p=p, K=2, pi=np.full(2, 0.5),
                    means=[-1.5 * ones, 0 * ones], edge_probs=(0.1, 0.8))
    raise ValueError(f"unknown scenario {name!r}; expected one of {SCENARIOS}")


def make_scenario(name, seed, p=None, **overrides):
    """Build one of the named simulation settings and draw a dataset.

    ``p`` only applies to ``p-ge-n`` (100 or 200). Precision matrices are
    drawn from the stream ``(seed, 0)`` and the sample from ``(seed, 1)``.
    """
    cfg = _scenario_config(name, p)
    cfg.update(overrides)
    scenario = SyntheticScenario(seed=seed, name=name, **cfg)
    return scenario, draw_truth(scenario)


def draw_truth(scenario):
    rng = make_rng(scenario.seed, 0)
    omegas, graphs = [], []
    for q in scenario.edge_probs:
        om, adj = random_sparse_precision(scenario.p, q, rng, scenario.weight_range,
                                          scenario.margin, return_graph=True)
        omegas.append(om)
        graphs.append(adj)
    truth = sample_mixture(scenario, omegas, make_rng(scenario.seed, 1))
    truth.adjacency = graphs
    return truth


def motivating_scenario(seed, n=200, p=20, edge_probs=(0.1, 0.8)):
    """Two-component setting with one sparse and one dense graph."""
    ones = np.ones(p)
    scenario = SyntheticScenario(n=n, p=p, K=2, pi=np.full(2, 0.5),
                                 means=[-1.5 * ones, 0 * ones], edge_probs=edge_probs,
                                 seed=seed, name="motivating")
    return scenario, draw_truth(scenario)
