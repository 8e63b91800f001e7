import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cgcn.graph import SHIFT_KINDS, Graph, GraphBatch, build_shift_operator, normalize_rows, shift_signal, shift_stack
from cgcn.synthetic import path_graph, star_graph

from conftest import random_graph


def dense(s):
    return s.matrix.toarray()


class TestGraph:
    def test_symmetrized_edges(self):
        g = Graph.from_edges(3, [(0, 1, 2.0), (1, 2)])
        a = g.adjacency().toarray()
        np.testing.assert_array_equal(a, a.T)
        assert a[0, 1] == 2.0 and a[1, 2] == 1.0

    def test_self_loop_stored_once(self):
        g = Graph.from_edges(2, [(0, 0), (0, 1), (0, 0)])
        assert np.sum((g.src == 0) & (g.dst == 0)) == 1
        assert g.num_edges == 2

    def test_duplicate_keeps_first_weight(self):
        g = Graph.from_edges(2, [(0, 1, 3.0), (1, 0, 5.0)])
        assert g.adjacency()[0, 1] == 3.0

    def test_out_of_range_edge(self):
        with pytest.raises(ValueError):
            Graph.from_edges(2, [(0, 2)])


class TestShiftOperator:
    def test_path_adjacency(self):
        s = build_shift_operator(path_graph(3), "adjacency")
        expected = np.zeros((3, 3))
        for i, j in [(0, 1), (1, 0), (1, 2), (2, 1)]:
            expected[i, j] = 1.0
        np.testing.assert_array_equal(dense(s), expected)

    def test_single_node(self):
        s = build_shift_operator(Graph.from_edges(1, []), "adjacency")
        np.testing.assert_array_equal(dense(s), np.zeros((1, 1)))

    def test_triangle_symmetric_normalized(self):
        g = Graph.from_edges(3, [(0, 1), (1, 2), (0, 2)])
        s = dense(build_shift_operator(g, "symmetric-normalized-adjacency"))
        # hand computation: degrees are all 2, so every edge gets 1/sqrt(2*2)
        a = np.ones((3, 3)) - np.eye(3)
        d = np.diag([2.0**-0.5] * 3)
        np.testing.assert_allclose(s, d @ a @ d, atol=1e-15)
        np.testing.assert_allclose(s[~np.eye(3, dtype=bool)], 0.5)

    def test_laplacians(self):
        g = path_graph(3)
        lap = dense(build_shift_operator(g, "laplacian"))
        np.testing.assert_array_equal(lap, [[1, -1, 0], [-1, 2, -1], [0, -1, 1]])
        nlap = dense(build_shift_operator(g, "normalized-laplacian"))
        r = 2.0**-0.5
        np.testing.assert_allclose(nlap, [[1, -r, 0], [-r, 1, -r], [0, -r, 1]], atol=1e-15)

    def test_isolated_node_gets_zero_row(self):
        g = Graph.from_edges(3, [(0, 1)])
        for kind in ("symmetric-normalized-adjacency", "normalized-laplacian"):
            s = dense(build_shift_operator(g, kind))
            np.testing.assert_array_equal(s[2], 0.0)
            np.testing.assert_array_equal(s[:, 2], 0.0)
            with pytest.raises(ValueError):
                build_shift_operator(g, kind, allow_isolated=False)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            build_shift_operator(path_graph(3), "random-walk")

    def test_edge_weights_honoured(self):
        g = Graph.from_edges(2, [(0, 1, 2.5)])
        np.testing.assert_array_equal(dense(build_shift_operator(g, "adjacency")), [[0, 2.5], [2.5, 0]])

    @pytest.mark.parametrize("kind", SHIFT_KINDS)
    def test_symmetric_and_sparsity(self, kind, rng):
        g = random_graph(rng, 12)
        s = dense(build_shift_operator(g, kind))
        assert np.abs(s - s.T).max() == 0.0
        pattern = g.adjacency().toarray() != 0
        off = ~pattern & ~np.eye(12, dtype=bool)
        assert np.all(s[off] == 0)


class TestShifts:
    def test_zero_hops_is_identity(self, rng):
        x = rng.standard_normal((4, 2))
        s = build_shift_operator(path_graph(4))
        out = shift_signal(s, x, 0)
        assert np.array_equal(out, x)

    def test_path_hops(self):
        s = build_shift_operator(path_graph(3), "adjacency")
        x = np.array([[1.0], [0.0], [0.0]])
        a = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float)
        np.testing.assert_array_equal(shift_signal(s, x, 1), a @ x)
        np.testing.assert_array_equal(shift_signal(s, x, 1), [[0], [1], [0]])
        np.testing.assert_array_equal(shift_signal(s, x, 2), [[1], [0], [1]])

    def test_stack_rows(self):
        s = build_shift_operator(path_graph(3), "adjacency")
        stack = shift_stack(s, np.array([[1.0], [0.0], [0.0]]), 2)
        np.testing.assert_array_equal(stack[:, 0, :], [[1], [0], [1]])
        assert shift_stack(s, np.ones((3, 1)), 0).shape == (1, 3, 1)

    def test_star_center(self):
        s = build_shift_operator(star_graph(3), "adjacency")
        stack = shift_stack(s, np.ones((4, 1)), 1)
        np.testing.assert_array_equal(stack[:, 0, :], [[1], [3]])

    def test_dimension_mismatch(self):
        s = build_shift_operator(path_graph(3))
        with pytest.raises(ValueError):
            shift_signal(s, np.ones((4, 1)), 1)
        with pytest.raises(ValueError):
            shift_signal(s, np.ones((3, 1)), -1)

    @given(st.integers(0, 4), st.integers(0, 4), st.integers(0, 10_000))
    def test_hop_composition(self, a, b, seed):
        rng = np.random.default_rng(seed)
        s = build_shift_operator(random_graph(rng, 8))
        x = rng.standard_normal((8, 3))
        lhs = shift_signal(s, x, a + b)
        rhs = shift_signal(s, shift_signal(s, x, b), a)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12 * max(1.0, np.abs(lhs).max()))

    @given(st.sampled_from(SHIFT_KINDS), st.integers(0, 3), st.integers(0, 10_000))
    def test_permutation_equivariance(self, kind, k, seed):
        rng = np.random.default_rng(seed)
        g = random_graph(rng, 9)
        x = rng.standard_normal((9, 2))
        perm = rng.permutation(9)
        p = np.eye(9)[perm].T  # p @ e_i = e_{perm[i]}
        s = build_shift_operator(g, kind)
        sp_ = build_shift_operator(g.permuted(perm), kind)
        np.testing.assert_allclose(dense(sp_), p @ dense(s) @ p.T, atol=1e-15)
        np.testing.assert_allclose(shift_signal(sp_, p @ x, k), p @ shift_signal(s, x, k), atol=1e-12)


class TestNormalizeRows:
    def test_examples(self):
        out = normalize_rows(np.array([[3.0, 4.0], [0.0, 0.0], [1.0, 0.0]]))
        np.testing.assert_allclose(out, [[0.6, 0.8], [0, 0], [1, 0]])

    @given(st.integers(0, 10_000))
    def test_idempotent(self, seed):
        x = np.random.default_rng(seed).standard_normal((6, 3))
        x[2] = 0
        once = normalize_rows(x)
        np.testing.assert_allclose(normalize_rows(once), once, atol=1e-15)
        norms = np.linalg.norm(once, axis=1)
        np.testing.assert_allclose(norms[[0, 1, 3, 4, 5]], 1.0)


class TestGraphBatch:
    def test_block_diag_and_pool(self):
        shifts = [build_shift_operator(path_graph(2), "adjacency"), build_shift_operator(path_graph(3), "adjacency")]
        b = GraphBatch(shifts)
        assert b.num_graphs == 2 and b.num_nodes == 5
        x = np.arange(5.0)[:, None]
        np.testing.assert_array_equal(b.sum_pool(x), [[1.0], [9.0]])
        assert dense(b.shift)[1, 2] == 0
        assert [len(p) for p in b.split(x)] == [2, 3]
