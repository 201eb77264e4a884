import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import adjusted_rand_score

from gemini.metrics import (
    ContingencyTable,
    _lloyd,
    GridSpec,
    appendix_a_mi,
    ari,
    binary_entropy,
    decision_grid,
    delta_mi,
    delta_mi_limit,
    kmeans,
    kmeans_plus_plus,
    mixture_beta,
    monte_carlo_boundary_mi,
    nonempty_clusters,
    renyi_entropy,
    renyi_entropy_map,
    shannon_entropy,
)
from gemini.models import MlpModel

LOG2 = np.log(2.0)


class TestAri:
    def test_identical_up_to_relabel(self):
        assert ari([0, 0, 1, 1, 2], [5, 5, 3, 3, 9]) == 1.0

    def test_hand_values(self):
        assert ari([0, 0, 0, 0], [0, 0, 1, 1]) == pytest.approx(0.0, abs=1e-15)
        assert ari([0, 0, 1, 1], [0, 1, 0, 1]) == pytest.approx(-0.5, abs=1e-15)

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            ari([0, 1], [0, 1, 1])

    def test_too_short(self):
        with pytest.raises(ValueError):
            ari([0], [0])

    def test_contingency_marginals(self):
        t = ContingencyTable.from_labels([0, 0, 1, 2, 2, 2], [1, 0, 0, 1, 1, 0])
        assert t.counts.sum() == 6
        np.testing.assert_array_equal(t.row_sums, [2, 1, 3])
        np.testing.assert_array_equal(t.col_sums, [3, 3])

    @settings(max_examples=200, deadline=None)
    @given(
        st.lists(st.tuples(st.integers(0, 4), st.integers(0, 5)), min_size=2, max_size=40),
        st.permutations(range(6)),
    )
    def test_matches_reference_and_symmetry(self, pairs, perm):
        a = np.array([p[0] for p in pairs])
        b = np.array([p[1] for p in pairs])
        value = ari(a, b)
        assert value == pytest.approx(adjusted_rand_score(a, b), abs=1e-12)
        assert ari(b, a) == pytest.approx(value, abs=1e-12)
        assert ari(a, np.array(perm)[b]) == pytest.approx(value, abs=1e-12)
        assert -1.0 <= value <= 1.0


class TestEntropy:
    @pytest.mark.parametrize("order", [0.5, 1.0, 2.0, 3.0, np.inf])
    def test_uniform_and_one_hot(self, order):
        K = 4
        assert renyi_entropy(np.full((1, K), 1 / K), order)[0] == pytest.approx(np.log(K), abs=1e-12)
        assert renyi_entropy(np.eye(K), order) == pytest.approx(np.zeros(K), abs=1e-12)

    def test_shannon_limit(self, rng):
        P = rng.dirichlet(np.ones(5), size=20)
        H = shannon_entropy(P)
        for order in (1 - 1e-4, 1 + 1e-4):
            np.testing.assert_allclose(renyi_entropy(P, order), H, atol=1e-4 * np.log(5) ** 2)
        np.testing.assert_allclose(renyi_entropy(P, 1 + 1e-7), H, atol=1e-6)

    def test_non_increasing_in_order(self, rng):
        P = rng.dirichlet(np.ones(3), size=50)
        orders = [0.5, 1.0, 2.0, 5.0, np.inf]
        vals = np.array([renyi_entropy(P, o) for o in orders])
        assert np.all(np.diff(vals, axis=0) <= 1e-12)

    def test_bad_order(self):
        with pytest.raises(ValueError):
            renyi_entropy(np.ones((1, 2)) / 2, 0.0)

    def test_entropy_map_bounds(self):
        model = MlpModel([2, 8, 3], seed=1)
        grid = GridSpec(-2, 2, -1, 1, resolution=15)
        emap = renyi_entropy_map(model, grid, order=2)
        assert emap.values.shape == (15, 15)
        assert np.all(emap.values >= 0) and np.all(emap.values <= np.log(3) + 1e-12)
        assert len(list(emap.rows())) == 225

    def test_zero_model_map_is_log_k(self):
        model = MlpModel([2, 4, 3], seed=0)
        for t in model.parameters():
            t.value = np.zeros_like(t.value)
        emap = renyi_entropy_map(model, GridSpec(0, 1, 0, 1, 5))
        np.testing.assert_allclose(emap.values, np.log(3), atol=1e-12)

    def test_decision_grid_labels(self):
        model = MlpModel([2, 4, 3], seed=0)
        _, _, lab = decision_grid(model, GridSpec.around(np.array([[0.0, 0.0], [1.0, 2.0]]), 7))
        assert lab.shape == (7, 7) and lab.min() >= 0 and lab.max() < 3


class TestNonemptyClusters:
    def test_single_cluster(self):
        assert nonempty_clusters(np.zeros(10, dtype=int)) == 1

    def test_four_of_five(self):
        assert nonempty_clusters(np.array([0, 1, 2, 4] * 5)) == 4

    def test_posterior_threshold(self):
        P = np.array([[0.99, 0.0, 0.01, 0.0, 0.0]] * 10)
        assert nonempty_clusters(P) == 1
        assert nonempty_clusters(P, threshold=0.001) == 2

    def test_never_exceeds_k(self, rng):
        for _ in range(50):
            P = rng.dirichlet(np.ones(5) * 0.3, size=30)
            assert nonempty_clusters(P) <= 5
            assert nonempty_clusters(P.argmax(axis=1)) <= 5


class TestBoundaryMI:
    def test_a_limit_is_log2(self):
        assert appendix_a_mi("A", 1e-12, 0.3) == pytest.approx(LOG2, abs=1e-9)

    def test_a_independent_of_beta(self):
        assert appendix_a_mi("A", 0.1, 0.2) == appendix_a_mi("A", 0.1, 0.7)

    def test_b_at_half_is_zero(self):
        for beta in (0.1, 0.5, 0.9):
            assert appendix_a_mi("B", 0.5, beta) == pytest.approx(0.0, abs=1e-15)

    def test_delta_zero_at_half_beta(self):
        assert delta_mi(1e-12, 0.5) == pytest.approx(0.0, abs=1e-9)

    def test_limit_value(self):
        expected = LOG2 + 0.75 * np.log(0.75) + 0.25 * np.log(0.25)
        assert delta_mi_limit(0.25) == pytest.approx(expected, abs=1e-15)
        assert expected == pytest.approx(0.130812, abs=1e-6)
        for beta in (0.25, 0.5, 0.75):
            assert delta_mi(1e-8, beta) == pytest.approx(delta_mi_limit(beta), abs=1e-6)

    def test_b_matches_direct_kl(self):
        # direct evaluation of E_x KL(p(y|x) || p(y)) for the step model B
        eps, beta = 0.07, 0.34
        pi = eps + beta * (1 - 2 * eps)

        def kl(p, q):
            return p * np.log(p / q) + (1 - p) * np.log((1 - p) / (1 - q))

        direct = beta * kl(1 - eps, pi) + (1 - beta) * kl(eps, pi)
        assert appendix_a_mi("B", eps, beta) == pytest.approx(direct, abs=1e-14)

    def test_binary_entropy(self):
        assert binary_entropy(0.5) == pytest.approx(LOG2)
        assert binary_entropy(0.0) == 0.0

    def test_beta(self):
        assert mixture_beta(0.0, 2.0, 1.0) == pytest.approx(0.4772498680518208, abs=1e-12)

    def test_invalid(self):
        with pytest.raises(ValueError):
            appendix_a_mi("C", 0.1, 0.1)
        with pytest.raises(ValueError):
            appendix_a_mi("A", 0.0, 0.1)
        with pytest.raises(ValueError):
            monte_carlo_boundary_mi("A", 0.1, 1.0, 0.0, 1.0)

    @pytest.mark.parametrize("kind", ["A", "B"])
    def test_monte_carlo_agrees(self, kind):
        eps, mu0, mu1, sigma = 0.05, 0.0, 2.0, 1.0
        mc = monte_carlo_boundary_mi(kind, eps, mu0, mu1, sigma, n_samples=1000, seed=3, n_repeats=50)
        closed = appendix_a_mi(kind, eps, mixture_beta(mu0, mu1, sigma))
        assert abs(mc.mean - closed) <= 3 * mc.std_error

    def test_monte_carlo_uninformative(self):
        for kind in "AB":
            mc = monte_carlo_boundary_mi(kind, 0.5, 0.0, 1.0, 1.0, n_samples=200, n_repeats=5)
            assert mc.mean == pytest.approx(0.0, abs=1e-12)


class TestKMeans:
    def test_pairs(self):
        X = np.array([[0.0, 0.0], [0.0, 1.0], [10.0, 10.0], [10.0, 11.0]])
        res = kmeans(X, 2, seed=0)
        assert ari([0, 0, 1, 1], res.labels) == 1.0
        centers = res.centers[np.argsort(res.centers[:, 0])]
        np.testing.assert_allclose(centers, [[0.0, 0.5], [10.0, 10.5]])

    def test_single_cluster_is_mean(self, rng):
        X = rng.normal(size=(40, 3))
        np.testing.assert_allclose(kmeans(X, 1).centers[0], X.mean(axis=0), atol=1e-14)

    def test_sse_monotone(self, rng):
        for seed in range(10):
            X = rng.normal(size=(200, 2)) + rng.integers(0, 3, size=(200, 1)) * 2.0
            h = kmeans(X, 5, seed=seed).history
            assert np.all(np.diff(h) <= 1e-9 * h[0])

    def test_fixed_point(self, rng):
        X = rng.normal(size=(150, 2))
        first = kmeans(X, 4, seed=1)
        again = kmeans(X, 4, init=first.centers)
        np.testing.assert_array_equal(again.labels, first.labels)
        np.testing.assert_allclose(again.centers, first.centers, atol=1e-12)
        assert again.history[0] == pytest.approx(again.history[-1], abs=1e-9)

    def test_deterministic(self, rng):
        X = rng.normal(size=(100, 2))
        np.testing.assert_array_equal(kmeans(X, 3, seed=5).labels, kmeans(X, 3, seed=5).labels)

    def test_restarts_keep_lowest_inertia(self, rng):
        X = np.vstack([rng.normal(size=(60, 2)) + c for c in ([0, 0], [6, 0], [0, 6], [6, 6])])
        best = kmeans(X, 4, seed=0, n_init=8)
        # the first restart draws from the same stream as a single run with that seed
        assert best.inertia <= kmeans(X, 4, seed=0).inertia
        stream = np.random.default_rng(0)
        restarts = [_lloyd(X, kmeans_plus_plus(X, 4, stream), 300).inertia for _ in range(8)]
        assert best.inertia == min(restarts)

    def test_n_init_validation(self):
        X = np.zeros((4, 1)) + np.arange(4)[:, None]
        with pytest.raises(ValueError):
            kmeans(X, 2, n_init=0)
        with pytest.raises(ValueError, match="n_init"):
            kmeans(X, 2, init=X[:2], n_init=3)

    def test_k_too_large(self):
        with pytest.raises(ValueError):
            kmeans(np.zeros((3, 2)), 4)

    def test_duplicate_points_fill_clusters(self):
        # k-means++ cannot pick distinct centers; repair must keep every label valid
        X = np.zeros((6, 2))
        res = kmeans(X, 3, seed=0)
        assert res.inertia == 0.0
        assert res.labels.max() < 3
