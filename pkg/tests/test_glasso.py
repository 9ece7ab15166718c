import numpy as np
import pytest
from hypothesis import given, strategies as st

from gwmix.glasso import (
    GlassoOptions,
    glasso_objective,
    kkt_residual,
    weighted_glasso,
)

from conftest import random_pd


def two_by_two(s12, r12):
    S = np.array([[1.0, s12], [s12, 1.0]])
    R = np.array([[0.0, r12], [r12, 0.0]])
    return S, R


def closed_form_2x2(s12, r12):
    # unit-diagonal 2x2: Sigma_12 is the soft threshold of S_12
    t = np.sign(s12) * max(abs(s12) - r12, 0.0)
    return np.linalg.inv(np.array([[1.0, t], [t, 1.0]]))


def test_fully_shrunk_2x2():
    S, R = two_by_two(0.3, 0.4)
    sol = weighted_glasso(S, R)
    np.testing.assert_array_equal(sol.omega, np.eye(2))


def test_soft_threshold_2x2():
    S, R = two_by_two(0.6, 0.2)
    sol = weighted_glasso(S, R)
    np.testing.assert_allclose(sol.sigma[0, 1], 0.4, atol=1e-10)
    np.testing.assert_allclose(sol.omega, np.linalg.inv([[1, 0.4], [0.4, 1]]), atol=1e-8)


@pytest.mark.parametrize("r", np.linspace(0, 1, 11))
def test_2x2_sweep(r):
    S, R = two_by_two(-0.7, r)
    np.testing.assert_allclose(weighted_glasso(S, R).omega, closed_form_2x2(-0.7, r), atol=1e-8)


def test_unpenalized_is_inverse(rng):
    S = random_pd(rng, 6)
    sol = weighted_glasso(S, np.zeros((6, 6)))
    np.testing.assert_allclose(sol.omega, np.linalg.inv(S), atol=1e-6)
    assert sol.converged


def test_kkt_examples():
    S, R = two_by_two(0.6, 0.2)
    assert kkt_residual(S, closed_form_2x2(0.6, 0.2), R) <= 1e-10
    assert kkt_residual(np.eye(3), np.eye(3), np.full((3, 3), 0.7)) == 0.0
    with pytest.raises(ValueError):
        kkt_residual(np.eye(2), np.eye(3), np.eye(2))


def test_input_validation():
    with pytest.raises(ValueError, match="diagonal"):
        weighted_glasso(np.array([[0.0, 0.1], [0.1, 1.0]]), np.zeros((2, 2)))
    with pytest.raises(ValueError, match="mismatch"):
        weighted_glasso(np.eye(2), np.zeros((3, 3)))
    with pytest.raises(ValueError):
        weighted_glasso(np.eye(2), -np.ones((2, 2)))
    with pytest.raises(ValueError):
        GlassoOptions(tolerance=0)
    with pytest.raises(ValueError):
        GlassoOptions(max_iterations=0)


def test_nonconvergence_is_reported(rng):
    X = rng.standard_normal((40, 10))
    S = np.cov(X.T, bias=True)
    sol = weighted_glasso(S, np.full((10, 10), 0.01), GlassoOptions(max_iterations=1, tolerance=1e-12))
    assert not sol.converged and sol.outer_sweeps == 1


def test_infinite_penalty_is_capped(rng):
    S = random_pd(rng, 4)
    R = np.full((4, 4), np.inf)
    sol = weighted_glasso(S, R)
    np.testing.assert_allclose(sol.omega, np.diag(1 / np.diag(S)), atol=1e-12)


def test_penalized_diagonal(rng):
    S = random_pd(rng, 4)
    R = np.full((4, 4), 0.3)
    sol = weighted_glasso(S, R, GlassoOptions(penalize_diagonal=True, tolerance=1e-8))
    np.testing.assert_allclose(np.diag(np.linalg.inv(sol.omega)), np.diag(S) + 0.3, atol=1e-6)


def random_problem(seed, p):
    """Sample covariance of 2p+3 draws from a unit-diagonal Gaussian, with a
    random symmetric penalty of zero diagonal on the scale of S."""
    rng = np.random.default_rng(seed)
    C = random_pd(rng, p)
    d = np.sqrt(np.diag(C))
    C = C / np.outer(d, d)
    X = rng.multivariate_normal(np.zeros(p), C, size=2 * p + 3)
    S = np.cov(X.T, bias=True)
    R = rng.uniform(0, 1, (p, p)) * np.abs(S - np.diag(np.diag(S))).max()
    R = 0.5 * (R + R.T)
    np.fill_diagonal(R, 0.0)
    return S, R


@given(st.integers(0, 10**6), st.sampled_from([2, 5, 10]))
def test_kkt_certificate(seed, p):
    S, R = random_problem(seed, p)
    sol = weighted_glasso(S, R)
    assert kkt_residual(S, sol.omega, R) <= 1e-4
    np.testing.assert_array_equal(sol.omega != 0, (sol.omega != 0).T)
    np.linalg.cholesky(sol.omega)
    # diagonal of the implied covariance equals diag(S)
    np.testing.assert_allclose(np.diag(np.linalg.inv(sol.omega)), np.diag(S), atol=1e-4)


@given(st.integers(0, 10**6), st.integers(2, 8))
def test_objective_beats_diagonal(seed, p):
    S, R = random_problem(seed, p)
    sol = weighted_glasso(S, R, GlassoOptions(tolerance=1e-8))
    base = glasso_objective(S, np.diag(1 / np.diag(S)), R)
    assert glasso_objective(S, sol.omega, R) >= base - 1e-10


@given(st.integers(0, 10**6), st.integers(2, 8))
def test_saturation(seed, p):
    S, _ = random_problem(seed, p)
    off = np.abs(S - np.diag(np.diag(S))).max()
    sol = weighted_glasso(S, np.full((p, p), off))
    np.testing.assert_allclose(sol.omega, np.diag(1 / np.diag(S)), rtol=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_monotone_path(seed):
    S, R0 = random_problem(seed, 10)
    R0 = R0 / R0.max()
    opts = GlassoOptions(tolerance=1e-8)
    counts = []
    for c in np.linspace(0.0, 1.0, 15) * np.abs(S - np.diag(np.diag(S))).max():
        om = weighted_glasso(S, c * R0, opts).omega
        # ignore entries that sit at the solver tolerance
        counts.append(int(np.sum(np.abs(om[np.triu_indices(10, 1)]) > 1e-6)))
    assert all(a >= b for a, b in zip(counts, counts[1:])), counts


@pytest.mark.parametrize("seed", range(10))
def test_warm_and_cold_agree(seed):
    S, R = random_problem(seed, 8)
    opts = GlassoOptions(tolerance=1e-8)
    cold = weighted_glasso(S, R, opts)
    S2, R2 = random_problem(seed + 1000, 8)
    # warm start from the solution of an unrelated problem
    other = weighted_glasso(S2, R2, opts)
    warm = weighted_glasso(S, R, GlassoOptions(tolerance=1e-8, warm_start=(other.omega, other.sigma)))
    big = (np.abs(cold.omega) > 1e-6) | (np.abs(warm.omega) > 1e-6)
    np.testing.assert_array_equal(cold.omega[big] != 0, warm.omega[big] != 0)
    np.testing.assert_allclose(warm.omega, cold.omega, atol=1e-5)


@pytest.mark.parametrize("seed", range(10))
def test_path_points_are_certified(seed):
    S, R0 = random_problem(seed, 10)
    R0 = R0 / R0.max()
    for c in np.linspace(0.0, 1.0, 15) * np.abs(S - np.diag(np.diag(S))).max():
        om = weighted_glasso(S, c * R0, GlassoOptions(tolerance=1e-8)).omega
        assert kkt_residual(S, om, c * R0) <= 1e-6
