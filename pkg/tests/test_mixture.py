import numpy as np
import pytest
from scipy.stats import multivariate_normal

from gwmix.glasso import GlassoOptions, kkt_residual
from gwmix.metrics import ari
from gwmix.mixture import (
    DegenerateComponentError,
    FitConfig,
    ModelParams,
    SearchError,
    bic,
    classify,
    count_d0,
    e_step,
    fit,
    lambda_grid,
    m_step,
    model_search,
    penalized_loglik,
    penalty_value,
)
from gwmix.penalty import PenaltyStrategy, init_reference_precisions, make_plan
from gwmix.serialize import read_fit_json, standardize, write_fit_json
from gwmix.simulate import make_rng, make_scenario, sample_mixture
from gwmix.spd import is_pd


def with_covariance(S, n, seed=0):
    """n rows whose (biased) sample covariance is exactly S and mean is 0."""
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((n, S.shape[0]))
    Z -= Z.mean(axis=0)
    Q, _ = np.linalg.qr(Z)
    # remove the component along the constant vector, then rescale
    Z = Q * np.sqrt(n)
    return Z @ np.linalg.cholesky(S).T


def params(pi, mus, omegas):
    return ModelParams(np.array(pi), np.array(mus, dtype=float), np.array(omegas, dtype=float))


# E-step

def test_single_component_loglik(rng):
    X = rng.standard_normal((20, 3))
    om = np.array([[2.0, 0.3, 0], [0.3, 1.0, 0.1], [0, 0.1, 1.5]])
    mu = np.array([0.1, -0.2, 0.3])
    z, ll = e_step(X, params([1.0], [mu], [om]))
    np.testing.assert_array_equal(z, np.ones((20, 1)))
    ref = multivariate_normal(mu, np.linalg.inv(om)).logpdf(X).sum()
    assert ll == pytest.approx(ref, abs=1e-10)


def test_equidistant_point():
    z, _ = e_step(np.array([[0.0, 0.0]]), params([0.5, 0.5], [[-1, 0], [1, 0]], [np.eye(2)] * 2))
    np.testing.assert_allclose(z, [[0.5, 0.5]], atol=1e-15)


def test_identical_components_return_proportions(rng):
    z, _ = e_step(rng.standard_normal((7, 2)), params([0.9, 0.1], [[0, 0]] * 2, [np.eye(2)] * 2))
    np.testing.assert_allclose(z, np.tile([0.9, 0.1], (7, 1)), atol=1e-14)


def test_e_step_errors():
    bad = params([1.0], [[0, 0]], [[[1.0, 2.0], [2.0, 1.0]]])
    with pytest.raises(np.linalg.LinAlgError):
        e_step(np.zeros((2, 2)), bad)
    far = params([1.0], [[0, 0]], [1e6 * np.eye(2)])
    X = np.array([[0.0, 0.0], [1e200, 0.0]])
    with pytest.raises(FloatingPointError, match="row 1"):
        e_step(X, far)


def test_classify_examples():
    P = params([0.5, 0.5], [[0, 0], [3, 3]], [np.eye(2)] * 2)
    assert classify(np.array([[0.0, 0.0]]), P)[0] == 0
    assert classify(np.array([[1.5, 1.5]]), P)[0] == 0


def test_classify_near_bayes_rate():
    sc, truth = make_scenario("diff-edges", 3)
    true = ModelParams(np.array(sc.pi), np.array(sc.means), np.array(truth.omegas))
    err = np.mean(classify(truth.X, true) != truth.labels)
    big = sample_mixture(sc.__class__(**{**sc.__dict__, "n": 20_000}), truth.omegas, make_rng(99))
    bayes = np.mean(classify(big.X, true) != big.labels)
    assert err <= bayes + 0.05


# M-step

def test_mle_limit(rng):
    X = rng.standard_normal((50, 4)) @ rng.standard_normal((4, 4))
    plan = make_plan([np.eye(4)], "zhou", 0.0)
    P = m_step(X, np.ones((50, 1)), plan, GlassoOptions(tolerance=1e-8))
    np.testing.assert_array_equal(P.mu[0], X.mean(axis=0))
    S = np.cov(X.T, bias=True)
    assert np.max(np.abs(P.omega[0] - np.linalg.inv(S))) < 1e-6


def test_hard_responsibilities_give_cluster_statistics(rng):
    X = rng.standard_normal((30, 2))
    lab = np.r_[np.zeros(12, int), np.ones(18, int)]
    z = np.eye(2)[lab]
    P, covs, _ = m_step(X, z, make_plan([np.eye(2)] * 2, "zhou", 0.0), return_details=True)
    np.testing.assert_allclose(P.pi, [0.4, 0.6])
    for k in range(2):
        np.testing.assert_allclose(P.mu[k], X[lab == k].mean(axis=0))
        np.testing.assert_allclose(covs[k], np.cov(X[lab == k].T, bias=True), atol=1e-14)


def test_degenerate_component(rng):
    X = rng.standard_normal((10, 3))
    z = np.eye(2)[np.r_[np.zeros(9, int), [1]]]
    with pytest.raises(DegenerateComponentError) as info:
        m_step(X, z, make_plan([np.eye(3)] * 2, "zhou", 0.0))
    assert info.value.component == 1


def test_saturating_lambda_gives_diagonal():
    _, truth = make_scenario("diff-edges", 0)
    X, _, _ = standardize(truth.X)
    ref = init_reference_precisions(X, 3)
    lam = lambda_grid(X, ref, 2)[-1]
    rep = fit(X, 3, lam, "zhou", init=ref)
    for om in rep.params.omega:
        assert np.max(np.abs(om - np.diag(np.diag(om)))) < 1e-3


# objective

def test_penalized_loglik_identities(rng):
    X = rng.standard_normal((25, 3))
    P = params([0.4, 0.6], [[0, 0, 0], [1, 1, 1]],
               [[[2, 0.5, 0], [0.5, 2, 0], [0, 0, 1]], np.eye(3)])
    ref = [np.eye(3), np.eye(3)]
    plan0 = make_plan(ref, "zhou", 0.0)
    assert penalized_loglik(X, P, plan0) == e_step(X, P)[1]
    plan1 = make_plan(ref, "zhou", 1.5)
    plan2 = make_plan(ref, "zhou", 3.0)
    diff = penalized_loglik(X, P, plan1) - penalized_loglik(X, P, plan2)
    assert diff == pytest.approx(1.5 * penalty_value(P, plan1), rel=1e-12)
    # all-ones weights: the off-diagonal L1 norm of each precision
    assert penalty_value(P, plan1) == pytest.approx(2 * 0.5)


def test_d0_examples():
    dense = params([1.0], [[0, 0]], [[[2.0, 0.5], [0.5, 2.0]]])
    assert count_d0(dense) == 5
    diag = params([0.5, 0.5], [[0, 0, 0]] * 2, [np.eye(3), 2 * np.eye(3)])
    assert count_d0(diag) == 13


def test_bic_formula(rng):
    X = rng.standard_normal((40, 2))
    rep = fit(X, 1, 0.0)
    assert rep.d0 == 5
    assert rep.bic == 2 * rep.unpenalized_loglik - 5 * np.log(40)
    assert bic(rep, n=100) == 2 * rep.unpenalized_loglik - 5 * np.log(100)


def test_lambda_grid_examples():
    X = with_covariance(np.eye(3), 12)
    np.testing.assert_allclose(lambda_grid(X, np.zeros(12, int), 5), 0.0, atol=1e-12)
    X = with_covariance(np.array([[1.0, 0.5], [0.5, 1.0]]), 10)
    grid = lambda_grid(X, np.zeros(10, int), 100)
    assert len(grid) == 100 and grid[0] == 0.0
    assert grid[-1] == pytest.approx(2.5, abs=1e-12)
    assert np.allclose(np.diff(grid), 2.5 / 99)


def test_lambda_grid_degenerate():
    with pytest.raises(ValueError):
        lambda_grid(np.zeros((3, 2)), np.array([0, 0, 1]))


# EM driver

@pytest.fixture(scope="module")
def diff_edges():
    _, truth = make_scenario("diff-edges", 1)
    X, _, _ = standardize(truth.X)
    return X, truth


def test_single_gaussian_mle(rng):
    X = rng.standard_normal((60, 3))
    rep = fit(X, 1, 0.0, config=FitConfig(glasso_options=GlassoOptions(tolerance=1e-8)))
    np.testing.assert_array_equal(rep.params.mu[0], X.mean(axis=0))
    assert np.max(np.abs(rep.params.omega[0] - np.linalg.inv(np.cov(X.T, bias=True)))) < 1e-6


@pytest.mark.parametrize("strategy", list(PenaltyStrategy))
def test_fit_invariants(diff_edges, strategy):
    X, truth = diff_edges
    rep = fit(X, 3, 5.0, strategy)
    np.testing.assert_allclose(rep.responsibilities.sum(axis=1), 1.0, atol=1e-10)
    tr = np.array(rep.trace)
    assert np.all(np.diff(tr) >= -1e-8 * np.abs(tr[:-1]))
    for om, S, R in zip(rep.params.omega, rep.covariances, rep.penalties):
        assert is_pd(om)
        assert kkt_residual(S, om, R) <= 1e-3
    assert ari(truth.labels, rep.labels) > 0.9


def test_bic_selected_fit_recovers_clusters(diff_edges):
    X, truth = diff_edges
    res = model_search(X, [3], "frob-diag", n_grid=10)
    assert ari(truth.labels, res.best.labels) > 0.9


def test_fit_is_deterministic(diff_edges):
    X, _ = diff_edges
    a = fit(X, 3, 4.0, "inverse")
    b = fit(X, 3, 4.0, "inverse")
    np.testing.assert_array_equal(a.params.omega, b.params.omega)
    np.testing.assert_array_equal(a.responsibilities, b.responsibilities)
    assert a.trace == b.trace and a.bic == b.bic


def test_label_permutation_invariance(diff_edges):
    X, _ = diff_edges
    ref = init_reference_precisions(X, 3)
    perm = np.array([2, 0, 1])
    a = fit(X, 3, 4.0, "frob-diag", labels=ref.partition)
    b = fit(X, 3, 4.0, "frob-diag", labels=perm[ref.partition])
    assert b.penalized_loglik == pytest.approx(a.penalized_loglik, rel=1e-10)
    assert b.bic == pytest.approx(a.bic, rel=1e-10)
    assert ari(a.labels, b.labels) == 1.0
    np.testing.assert_allclose(b.params.omega[perm], a.params.omega, atol=1e-8)


def test_fit_errors(rng):
    X = rng.standard_normal((5, 2))
    with pytest.raises(ValueError):
        fit(X, 1, -1.0)
    with pytest.raises(ValueError):
        fit(X, 5, 0.0)
    with pytest.raises(DegenerateComponentError) as info:
        fit(rng.standard_normal((12, 4)), 2, 0.0)
    assert isinstance(info.value.iteration, int)


# model search

def test_single_candidate_search_equals_fit(diff_edges):
    X, _ = diff_edges
    res = model_search(X, [3], "zhou", grids={3: [2.0]})
    direct = fit(X, 3, 2.0, "zhou")
    assert len(res.table) == 1
    np.testing.assert_array_equal(res.best.params.omega, direct.params.omega)
    assert res.best.bic == direct.bic


def test_search_table(diff_edges):
    X, _ = diff_edges
    res = model_search(X, [2, 3], "zhou", n_grid=4)
    assert len(res.table) == 8
    assert [(e.K, e.grid_index) for e in res.table] == [(k, i) for k in (2, 3) for i in range(4)]
    assert res.best.bic == max(e.bic for e in res.table)


def test_search_records_failures(rng):
    X = rng.standard_normal((30, 6))
    # K=4 unpenalized leaves fewer than p+1 points per component
    res = model_search(X, [1, 4], "zhou", grids={1: [0.0], 4: [0.0]})
    assert res.table[1].report is None and "DegenerateComponentError" in res.table[1].error
    assert res.best.K == 1
    with pytest.raises(SearchError):
        model_search(X, [4], "zhou", grids={4: [0.0]})


def test_search_parallel_matches_serial(diff_edges):
    X, _ = diff_edges
    a = model_search(X, [2, 3], "riem-diag", n_grid=3, jobs=1)
    b = model_search(X, [2, 3], "riem-diag", n_grid=3, jobs=2)
    assert [e.bic for e in a.table] == [e.bic for e in b.table]


def test_fit_json_round_trip(tmp_path, diff_edges):
    X, _ = diff_edges
    rep = fit(X, 3, 3.0, "riem-diag")
    write_fit_json(tmp_path / "fit.json", rep)
    P, doc = read_fit_json(tmp_path / "fit.json")
    np.testing.assert_array_equal(P.omega, rep.params.omega)
    np.testing.assert_array_equal(P.mu, rep.params.mu)
    np.testing.assert_array_equal(P.pi, rep.params.pi)
    assert doc["bic"] == rep.bic and doc["strategy"] == "riem-diag" and doc["schema_version"] == 1
    for key in ("n", "p", "K", "lambda", "d0", "loglik", "iterations", "converged"):
        assert key in doc
