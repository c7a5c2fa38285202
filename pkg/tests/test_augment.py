import numpy as np
import pytest

from tga.augment import (
    AugmentStrategy,
    augment,
    hnd_probabilities,
    make_views,
    round_half_away,
    sample_edge_remove,
    sample_node_drop,
    strategy_probabilities,
    uniform_perturb,
    upper_pairs,
    weighted_sample_without_replacement,
    wer_probabilities,
)
from tga.errors import ConfigError, DegenerateGraphError, InvalidRatioError
from tga.graphs import BrainGraph, normalize_adjacency

from conftest import toy_graph


def graph_from_degrees(d):
    """Stub graph carrying only a degree vector."""
    n = len(d)
    return BrainGraph(np.eye(n), np.eye(n), np.asarray(d, dtype=float))


def graph_from_upper(weights, n):
    a = np.eye(n)
    rows, cols = upper_pairs(n)
    a[rows, cols] = weights
    a[cols, rows] = weights
    return BrainGraph(a, a, np.abs(a).sum(axis=1) - 1.0)


class TestProbabilities:
    @pytest.mark.parametrize(
        "d, p",
        [([1, 2, 4], [4 / 7, 2 / 7, 1 / 7]), ([3, 3, 3, 3], [0.25] * 4), ([1, 1, 2], [0.4, 0.4, 0.2])],
    )
    def test_hnd(self, d, p):
        np.testing.assert_allclose(hnd_probabilities(graph_from_degrees(d)), p, atol=1e-15)

    def test_hnd_zero_degree(self):
        with pytest.raises(DegenerateGraphError):
            hnd_probabilities(graph_from_degrees([1.0, 0.0]))

    def test_wer_three_weights(self):
        # N=3 has exactly three pairs: (0,1), (0,2), (1,2)
        g = graph_from_upper([0.2, -0.4, 0.8], 3)
        np.testing.assert_allclose(wer_probabilities(g), [4 / 7, 2 / 7, 1 / 7], atol=1e-15)

    def test_wer_two_weights(self):
        q = np.array([1 / 0.5, 1 / 0.25])
        np.testing.assert_allclose(q / q.sum(), [1 / 3, 2 / 3])
        g = graph_from_upper([0.5, 0.25, 0.5], 3)
        p = wer_probabilities(g)
        assert p[1] / p[0] == pytest.approx(2.0, rel=1e-14)

    def test_wer_uniform(self):
        g = graph_from_upper(np.full(10, 0.3), 5)
        np.testing.assert_allclose(wer_probabilities(g), np.full(10, 0.1), atol=1e-15)


class TestSampler:
    def test_distinct_indices(self, rng):
        for _ in range(50):
            out = weighted_sample_without_replacement(np.full(8, 1 / 8), 5, rng)
            assert len(set(out.tolist())) == 5

    def test_zero_k(self, rng):
        assert weighted_sample_without_replacement(np.full(3, 1 / 3), 0, rng).size == 0

    def test_two_draw_law(self):
        """P(first=i, second=j) = p_i * p_j / (1 - p_i), the sequential law."""
        p = np.array([0.5, 0.3, 0.2])
        rng = np.random.default_rng(7)
        trials = 60000
        counts = np.zeros((3, 3))
        for _ in range(trials):
            i, j = weighted_sample_without_replacement(p, 2, rng)
            counts[i, j] += 1
        expected = np.array([[p[i] * p[j] / (1 - p[i]) if i != j else 0 for j in range(3)] for i in range(3)])
        np.testing.assert_allclose(counts / trials, expected, atol=0.01)


class TestNodeDrop:
    def test_ten_percent_of_ten(self, rng):
        g = toy_graph(1, n=10)
        view = sample_node_drop(g, 0.1, hnd_probabilities(g), rng)
        assert view.n_nodes == 9
        assert view.x_view.shape == (9, 10)
        assert view.mp_matrix.shape == (9, 9)

    def test_alpha_zero_identity(self, graph6, rng):
        view = sample_node_drop(graph6, 0.0, hnd_probabilities(graph6), rng)
        np.testing.assert_array_equal(view.kept_nodes, np.arange(6))
        np.testing.assert_array_equal(view.x_view, graph6.features)
        np.testing.assert_array_equal(view.mp_matrix, graph6.mp_matrix)

    def test_survivor_submatrix(self, graph6, rng):
        view = sample_node_drop(graph6, 0.5, hnd_probabilities(graph6), rng)
        kept = view.kept_nodes
        np.testing.assert_array_equal(view.mp_matrix, normalize_adjacency(graph6.adjacency[np.ix_(kept, kept)]))

    def test_near_certain_node(self):
        eps = 1e-6
        probs = np.array([1 - 2 * eps, eps, eps])
        g = graph_from_degrees([1.0, 1.0, 1.0])
        rng = np.random.default_rng(0)
        hits = sum(0 not in sample_node_drop(g, 1 / 3, probs, rng).kept_nodes for _ in range(100000))
        assert hits >= 99000

    def test_ratio_removing_everything(self, graph6, rng):
        with pytest.raises(InvalidRatioError):
            sample_node_drop(graph6, 0.95, hnd_probabilities(graph6), rng)


class TestEdgeRemove:
    def test_half_of_complete_four(self, rng):
        g = toy_graph(3, n=4)
        view = sample_edge_remove(g, 0.5, wer_probabilities(g), rng)
        rows, cols = upper_pairs(4)
        assert int(np.sum(view.a_aug[rows, cols] == 0.0)) == 3
        np.testing.assert_array_equal(view.a_aug, view.a_aug.T)
        np.testing.assert_array_equal(np.diag(view.a_aug), np.ones(4))

    def test_beta_zero_identity(self, graph6, rng):
        view = sample_edge_remove(graph6, 0.0, wer_probabilities(graph6), rng)
        np.testing.assert_array_equal(view.a_aug, graph6.adjacency)

    def test_features_follow_perturbed_adjacency(self, graph6, rng):
        view = sample_edge_remove(graph6, 0.5, wer_probabilities(graph6), rng)
        np.testing.assert_array_equal(view.x_view, view.a_aug)

    def test_source_graph_untouched(self, graph6, rng):
        before = graph6.adjacency.copy()
        sample_edge_remove(graph6, 0.5, wer_probabilities(graph6), rng)
        np.testing.assert_array_equal(graph6.adjacency, before)

    def test_equal_weights_frequency(self):
        g = graph_from_upper(np.full(6, 0.5), 4)
        rng = np.random.default_rng(11)
        probs = wer_probabilities(g)
        rows, cols = upper_pairs(4)
        trials = 100000
        removed = np.zeros(6)
        for _ in range(trials):
            removed += sample_edge_remove(g, 0.5, probs, rng).a_aug[rows, cols] == 0.0
        np.testing.assert_allclose(removed / trials, 0.5, atol=0.01)


class TestUniformPerturb:
    def test_node_frequency(self):
        g = graph_from_degrees(np.ones(10))
        strategy = AugmentStrategy("uniform_node", alpha=0.1)
        rng = np.random.default_rng(5)
        trials = 100000
        dropped = np.zeros(10)
        for _ in range(trials):
            keep = np.zeros(10, dtype=bool)
            keep[uniform_perturb(g, strategy, rng).kept_nodes] = True
            dropped += ~keep
        np.testing.assert_allclose(dropped / trials, 0.1, atol=0.01)

    def test_edge_beta_zero(self, graph6, rng):
        view = uniform_perturb(graph6, AugmentStrategy("uniform_edge", beta=0.0), rng)
        np.testing.assert_array_equal(view.a_aug, graph6.adjacency)

    def test_rejects_weighted_kind(self, graph6, rng):
        with pytest.raises(ConfigError):
            uniform_perturb(graph6, AugmentStrategy("hnd"), rng)


class TestMakeViews:
    def test_hnd_sizes(self, rng):
        g = toy_graph(2, n=10)
        v1, v2 = make_views(g, AugmentStrategy("hnd", alpha=0.1), rng)
        assert v1.n_nodes == v2.n_nodes == 9

    @pytest.mark.parametrize("strategy", [AugmentStrategy("hnd", alpha=0.0), AugmentStrategy("wer", beta=0.0)])
    def test_zero_ratio_views_identical(self, graph6, rng, strategy):
        v1, v2 = make_views(graph6, strategy, rng)
        np.testing.assert_array_equal(v1.mp_matrix, v2.mp_matrix)
        np.testing.assert_array_equal(v1.x_view, v2.x_view)

    def test_seeded_rerun(self, graph6):
        strategy = AugmentStrategy("wer")
        a = make_views(graph6, strategy, np.random.default_rng(3))
        b = make_views(graph6, strategy, np.random.default_rng(3))
        for va, vb in zip(a, b):
            assert np.array_equal(va.a_aug, vb.a_aug)
            assert np.array_equal(va.mp_matrix, vb.mp_matrix)

    def test_two_views_differ(self, graph6):
        v1, v2 = make_views(graph6, AugmentStrategy("wer"), np.random.default_rng(0))
        assert not np.array_equal(v1.a_aug, v2.a_aug)


class TestStrategy:
    @pytest.mark.parametrize("ratio", [-0.1, 1.0, 1.5])
    def test_bad_ratio(self, ratio):
        with pytest.raises(InvalidRatioError):
            AugmentStrategy("hnd", alpha=ratio)

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            AugmentStrategy("dropout")

    def test_uniform_probabilities_sizes(self, graph6):
        assert strategy_probabilities(graph6, AugmentStrategy("uniform_node")).size == 6
        assert strategy_probabilities(graph6, AugmentStrategy("uniform_edge")).size == 15

    def test_augment_dispatch(self, graph6, rng):
        assert augment(graph6, AugmentStrategy("hnd", alpha=0.5), rng).n_nodes == 3

    @pytest.mark.parametrize("x, k", [(0.5, 1), (1.5, 2), (2.5, 3), (0.49, 0), (-0.5, -1)])
    def test_round_half_away(self, x, k):
        assert round_half_away(x) == k
