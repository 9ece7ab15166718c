"""Gaussian mixtures with component-wise sparse precision matrices.

Penalized EM where each component's graphical-lasso penalty is weighted
by a matrix derived from a per-class reference precision.
"""
from __future__ import annotations

__version__ = "0.1.0"

from .glasso import GlassoOptions, GlassoSolution, kkt_residual, weighted_glasso
from .metrics import (
    ari,
    count_precision_params,
    edge_f1,
    edge_recovery,
    empirical_precisions,
    match_components,
    median_frobenius_distance,
)
from .mixture import (
    DegenerateComponentError,
    FitConfig,
    FitReport,
    ModelParams,
    SearchError,
    classify,
    e_step,
    fit,
    lambda_grid,
    m_step,
    model_search,
)
from .penalty import (
    PenaltyStrategy,
    build_penalty_matrices,
    init_reference_precisions,
    initial_partition,
)
from .simulate import SCENARIOS, make_scenario, motivating_scenario, random_sparse_precision
from .spd import MetricKind, cholesky_logdet, invert_spd, spd_distance

__all__ = [
    "__version__",
    "GlassoOptions", "GlassoSolution", "kkt_residual", "weighted_glasso",
    "ari", "count_precision_params", "edge_f1", "edge_recovery", "empirical_precisions",
    "match_components", "median_frobenius_distance",
    "DegenerateComponentError", "FitConfig", "FitReport", "ModelParams", "SearchError",
    "classify", "e_step", "fit", "lambda_grid", "m_step", "model_search",
    "PenaltyStrategy", "build_penalty_matrices", "init_reference_precisions", "initial_partition",
    "SCENARIOS", "make_scenario", "motivating_scenario", "random_sparse_precision",
    "MetricKind", "cholesky_logdet", "invert_spd", "spd_distance",
]
