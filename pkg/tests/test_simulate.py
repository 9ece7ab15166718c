import numpy as np
import pytest
from hypothesis import given, strategies as st

from gwmix.simulate import (
    SCENARIOS,
    SyntheticScenario,
    make_rng,
    make_scenario,
    motivating_scenario,
    random_sparse_precision,
    sample_mixture,
)


def test_empty_graph():
    om = random_sparse_precision(6, 0.0, make_rng(0))
    np.testing.assert_array_equal(om, 0.1 * np.eye(6))


def test_complete_graph():
    om = random_sparse_precision(3, 1.0, make_rng(0))
    assert np.all(om[~np.eye(3, dtype=bool)] != 0)


def test_edge_count_moment():
    rng = make_rng(11)
    counts = [int(random_sparse_precision(20, 0.5, rng, return_graph=True)[1].sum()) // 2
              for _ in range(1000)]
    se = np.sqrt(190 * 0.25) / np.sqrt(1000)
    assert abs(np.mean(counts) - 95) < 3 * se


@given(st.integers(0, 10**6), st.sampled_from([5, 20, 100]), st.floats(0, 1))
def test_precision_is_dominant_and_matches_graph(seed, p, q):
    om, A = random_sparse_precision(p, q, make_rng(seed), return_graph=True)
    off = np.abs(om).sum(axis=1) - np.abs(np.diag(om))
    assert np.all(np.diag(om) > off)
    np.linalg.cholesky(om)
    np.testing.assert_array_equal(om != 0, A | np.eye(p, dtype=bool))
    w = np.abs(om[A])
    assert np.all((w >= 0.5) & (w <= 1.0))


def test_large_sample_covariance():
    om = random_sparse_precision(5, 0.5, make_rng(2))
    sc = SyntheticScenario(n=50_000, p=5, K=1, pi=[1.0], means=[np.zeros(5)], edge_probs=[0.5], seed=2)
    gt = sample_mixture(sc, [om], make_rng(2, 1))
    S = np.cov(gt.X.T)
    err = np.linalg.norm(S - np.linalg.inv(om))
    scale = np.linalg.norm(np.linalg.inv(om))
    assert err / scale < 5 / np.sqrt(50_000) * np.sqrt(5)


def test_degenerate_proportions():
    sc = SyntheticScenario(n=50, p=2, K=2, pi=[1.0, 0.0], means=[np.zeros(2)] * 2,
                           edge_probs=[0.5, 0.5], seed=0)
    gt = sample_mixture(sc, [np.eye(2)] * 2, make_rng(0))
    assert np.all(gt.labels == 0)


def test_class_frequencies():
    sc = SyntheticScenario(n=10_000, p=2, K=3, pi=[0.2, 0.3, 0.5], means=[np.zeros(2)] * 3,
                           edge_probs=[0, 0, 0], seed=0)
    gt = sample_mixture(sc, [np.eye(2)] * 3, make_rng(0))
    freq = np.bincount(gt.labels, minlength=3) / 10_000
    se = np.sqrt(np.array(sc.pi) * (1 - np.array(sc.pi)) / 10_000)
    assert np.all(np.abs(freq - sc.pi) < 3 * se)


def test_same_seed_same_data():
    a = make_scenario("equal-edges", 5)[1]
    b = make_scenario("equal-edges", 5)[1]
    np.testing.assert_array_equal(a.X, b.X)
    np.testing.assert_array_equal(a.labels, b.labels)
    c = make_scenario("equal-edges", 6)[1]
    assert not np.array_equal(a.X, c.X)


@pytest.mark.parametrize("name, n, K, p, probs", [
    ("equal-edges", 1500, 3, 20, (0.5, 0.5, 0.5)),
    ("diff-edges", 1500, 3, 20, (0.1, 0.8, 0.4)),
    ("highdim-diff-edges", 1500, 3, 100, (0.1, 0.8, 0.4)),
    ("zero-mean-diff-edges", 1500, 3, 20, (0.1, 0.8, 0.4)),
    ("p-ge-n", 100, 2, 100, (0.1, 0.8)),
])
def test_named_scenarios(name, n, K, p, probs):
    sc, gt = make_scenario(name, 0)
    assert (sc.n, sc.K, sc.p) == (n, K, p)
    assert tuple(sc.edge_probs) == probs
    np.testing.assert_allclose(sc.pi, np.full(K, 1 / K))
    assert gt.X.shape == (n, p) and len(gt.omegas) == K


def test_scenario_means():
    m = make_scenario("diff-edges", 0)[0].means
    np.testing.assert_array_equal(m, [np.full(20, -1.5), np.zeros(20), np.full(20, 1.5)])
    m = make_scenario("highdim-diff-edges", 0)[0].means
    np.testing.assert_array_equal(m, [np.full(100, 5.0), np.zeros(100), np.full(100, 5.0)])
    assert np.all(np.asarray(make_scenario("zero-mean-diff-edges", 0)[0].means) == 0)


def test_p_ge_n_dimension():
    sc, gt = make_scenario("p-ge-n", 0, p=200)
    assert (sc.n, sc.K, sc.p) == (100, 2, 200)


def test_unknown_scenario():
    with pytest.raises(ValueError):
        make_scenario("no-such", 0)
    assert len(SCENARIOS) == 5


def test_invalid_scenario():
    with pytest.raises(ValueError):
        SyntheticScenario(n=10, p=2, K=2, pi=[0.7, 0.7], means=[np.zeros(2)] * 2,
                          edge_probs=[0.1, 0.2], seed=0)
    with pytest.raises(ValueError):
        SyntheticScenario(n=10, p=2, K=1, pi=[1.0], means=[np.zeros(2)], edge_probs=[1.5], seed=0)


def test_motivating_configuration():
    sc, gt = motivating_scenario(0)
    assert (sc.n, sc.p, sc.K) == (200, 20, 2)
    assert tuple(sc.edge_probs) == (0.1, 0.8)
    np.testing.assert_allclose(sc.pi, [0.5, 0.5])
