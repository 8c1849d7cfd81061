"""
Tests for the graph algorithms, each checked against its sequential oracle.
"""

import math

import pytest

from aam.algorithms import (
    UNVISITED,
    Verdict,
    bfs,
    boman_coloring,
    boruvka_mst,
    pagerank,
    st_connectivity,
)
from aam.algorithms.oracles import (
    UnionFind,
    bfs_oracle,
    is_proper_coloring,
    kruskal_mst,
    monochromatic_edges,
    pagerank_oracle,
    st_oracle,
)
from aam.core.bench import pick_source
from aam.core.errors import ConfigError, ContractError
from aam.core.graph import EdgeList, build_csr, synthesize_weights
from aam.models import RunConfig
from aam.utils.config import Settings

POLICIES = ["rtm", "hle", "bgq-short", "bgq-long", "atomics", "locks"]

# (M, C, T, N)
SHAPES = [(1, 1, 1, 1), (2, 16, 4, 4), (16, 1, 4, 1), (128, 16, 1, 4)]


def _config(M, C, T, N, policy="rtm", seed=0):
    return RunConfig(coarsen=M, coalesce=C, threads=T, procs=N, policy=policy, seed=seed, deterministic=True)


class TestBfs:
    """Level-synchronous BFS."""

    def test_path(self, path_graph, settings):
        """Distances along a path; the isolated vertex stays unvisited."""
        result = bfs(path_graph, 0, _config(1, 1, 1, 1), settings)

        assert result.distances == [0, 1, 2, 3, 4, UNVISITED]
        assert result.reached() == 5
        assert result.levels == 5

    def test_bad_source(self, path_graph):
        """A source outside the graph is a contract error."""
        with pytest.raises(ContractError):
            bfs(path_graph, 6)

    @pytest.mark.parametrize("policy", POLICIES)
    @pytest.mark.parametrize("M,C,T,N", SHAPES)
    def test_matches_oracle(self, kron_graph, policy, M, C, T, N, settings):
        """BFS distances equal the sequential oracle under every configuration."""
        result = bfs(kron_graph, 1, _config(M, C, T, N, policy), settings)
        assert result.distances == bfs_oracle(kron_graph, 1)

    def test_visited_check_skips_operators(self, kron_graph, settings):
        """The visited check removes operators without changing distances."""
        source = pick_source(kron_graph)
        checked = bfs(kron_graph, source, _config(4, 1, 2, 2), settings)
        unchecked = bfs(
            kron_graph, source,
            RunConfig(coarsen=4, threads=2, procs=2, deterministic=True, visited_check=False), settings,
        )

        assert checked.distances == unchecked.distances
        assert checked.stats.operators_skipped > 0
        assert unchecked.stats.operators_skipped == 0
        assert unchecked.stats.operator_failures > 0

    def test_threads_and_fault_injection(self, er_graph, settings):
        """Injected aborts on real threads do not change the result."""
        config = RunConfig(coarsen=4, threads=4, procs=2, fault_probability=0.2, seed=3)
        result = bfs(er_graph, 0, config, settings)

        assert result.distances == bfs_oracle(er_graph, 0)
        assert result.stats.aborts_other > 0


class TestPageRank:
    """Push-style PageRank."""

    @pytest.mark.parametrize("policy", POLICIES)
    @pytest.mark.parametrize("M,C,T,N", SHAPES)
    def test_matches_oracle(self, kron_graph, policy, M, C, T, N, settings):
        """Ranks agree with the oracle to 1e-9."""
        result = pagerank(kron_graph, 0.85, 5, _config(M, C, T, N, policy), settings)
        expected = pagerank_oracle(kron_graph, 0.85, 5)

        assert max(abs(a - b) for a, b in zip(result.ranks, expected)) < 1e-9
        assert result.iterations == 5

    def test_dangling_vertices_contribute_nothing(self, path_graph, settings):
        """The isolated vertex keeps only the teleport term."""
        result = pagerank(path_graph, 0.85, 3, _config(1, 1, 1, 1), settings)
        assert result.ranks[5] == pytest.approx(0.15 / 6)

    @pytest.mark.parametrize("d", [0.0, 1.0, 1.5])
    def test_bad_damping(self, path_graph, d):
        """d must lie strictly between 0 and 1."""
        with pytest.raises(ContractError):
            pagerank(path_graph, d)

    def test_initial_ranks(self, path_graph, settings):
        """Custom starting ranks are honoured."""
        initial = [1.0, 0, 0, 0, 0, 0]
        result = pagerank(path_graph, 0.5, 1, _config(1, 1, 1, 1), settings, initial=initial)
        assert result.ranks == pytest.approx(pagerank_oracle(path_graph, 0.5, 1, initial))


class TestBoruvka:
    """Minimum spanning forest."""

    def test_small_graph(self, weighted_graph, settings):
        """The MST of the fixture graph has weight 11."""
        result = boruvka_mst(weighted_graph, _config(1, 1, 1, 1), settings)

        assert result.total_weight == pytest.approx(11.0)
        assert result.edges == kruskal_mst(weighted_graph)

    @pytest.mark.parametrize("policy", POLICIES)
    @pytest.mark.parametrize("M,C,T,N", SHAPES)
    def test_matches_kruskal(self, weighted_kron, policy, M, C, T, N, settings):
        """The forest weight equals Kruskal's under every configuration."""
        result = boruvka_mst(weighted_kron, _config(M, C, T, N, policy), settings)
        expected = kruskal_mst(weighted_kron)

        assert math.isclose(result.total_weight, sum(w for _, _, w in expected), rel_tol=1e-12)
        assert len(result.edges) == len(expected)

    @pytest.mark.parametrize("handler_policy", ["retry", "backoff", "drop"])
    def test_handler_policies(self, weighted_kron, handler_policy, settings):
        """Every failure-handler policy still yields the minimum forest."""
        result = boruvka_mst(weighted_kron, _config(4, 1, 2, 2), settings, handler_policy=handler_policy)
        assert result.edges == kruskal_mst(weighted_kron)

    def test_forest_of_two_components(self, two_components, settings):
        """Disconnected inputs give one tree per component."""
        weighted = synthesize_weights(two_components, seed=1)
        result = boruvka_mst(weighted, _config(1, 1, 1, 2), settings)
        assert len(result.edges) == 3

    def test_requires_weights(self, path_graph):
        """Unweighted graphs are rejected."""
        with pytest.raises(ContractError):
            boruvka_mst(path_graph)

    def test_unknown_handler_policy(self, weighted_graph):
        """Handler policies are validated."""
        with pytest.raises(ConfigError):
            boruvka_mst(weighted_graph, handler_policy="ignore")


class TestStConnectivity:
    """Two-colour st-connectivity."""

    def test_connected(self, two_components, settings):
        """Vertices of the triangle are connected."""
        result = st_connectivity(two_components, 0, 2, _config(1, 1, 1, 1), settings)
        assert result.verdict is Verdict.CONNECTED

    def test_disconnected(self, two_components, settings):
        """Vertices of different components are not."""
        result = st_connectivity(two_components, 0, 4, _config(2, 1, 2, 2), settings)
        assert result.verdict is Verdict.DISCONNECTED
        assert not result.connected

    def test_same_vertex(self, two_components):
        """s == t is trivially connected."""
        assert st_connectivity(two_components, 3, 3).connected

    def test_directed_rejected(self):
        """The algorithm needs an undirected graph."""
        graph = build_csr(EdgeList.from_tuples(2, [(0, 1)]), directed=True)
        with pytest.raises(ContractError):
            st_connectivity(graph, 0, 1)

    @pytest.mark.parametrize("policy", POLICIES)
    @pytest.mark.parametrize("M,C,T,N", SHAPES)
    def test_matches_oracle(self, kron_graph, policy, M, C, T, N, settings):
        """Verdicts agree with union-find for connected and disconnected pairs."""
        far = max(range(kron_graph.n), key=lambda v: (kron_graph.degree(v) == 0, v))
        for s, t in [(1, 2), (1, far)]:
            result = st_connectivity(kron_graph, s, t, _config(M, C, T, N, policy), settings)
            assert result.connected == st_oracle(kron_graph, s, t)


class TestColoring:
    """Boman-style speculative coloring."""

    def test_edgeless(self, settings):
        """Without edges every vertex gets color 0."""
        graph = build_csr(EdgeList.from_tuples(4, []))
        result = boman_coloring(graph, _config(1, 1, 1, 2), settings)
        assert result.colors == [0, 0, 0, 0]

    def test_clique(self, complete4, settings):
        """K4 needs four distinct colors."""
        result = boman_coloring(complete4, _config(1, 1, 1, 4), settings)

        assert sorted(result.colors) == [0, 1, 2, 3]
        assert result.num_colors == 4

    @pytest.mark.parametrize("deterministic", [True, False])
    @pytest.mark.parametrize("policy", ["locks", "atomics"])
    def test_edge_across_two_processes(self, policy, deterministic):
        """K2 split over two processes finishes under the always-serializing policies."""
        graph = build_csr(EdgeList.from_tuples(2, [(0, 1)]))
        config = RunConfig(procs=2, threads=1, policy=policy, deterministic=deterministic)

        result = boman_coloring(graph, config, Settings(watchdog_seconds=5.0))

        assert sorted(result.colors) == [0, 1]

    @pytest.mark.parametrize("policy", POLICIES)
    @pytest.mark.parametrize("M,C,T,N", SHAPES)
    def test_valid_everywhere(self, er_graph, policy, M, C, T, N, settings):
        """No monochromatic edge and at most max_degree + 1 colors."""
        result = boman_coloring(er_graph, _config(M, C, T, N, policy, seed=N), settings)

        assert monochromatic_edges(er_graph, result.colors) == []
        assert is_proper_coloring(er_graph, result.colors)
        assert result.num_colors <= er_graph.max_degree() + 1


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("policy", POLICIES)
@pytest.mark.parametrize("M", [1, 2, 16, 128])
@pytest.mark.parametrize("C", [1, 16])
@pytest.mark.parametrize("T,N", [(1, 1), (4, 1), (1, 4), (4, 4)])
def test_oracle_equivalence_sweep(kron_graph, weighted_kron, er_graph, seed, policy, M, C, T, N, settings):
    """Every algorithm agrees with its oracle across the full configuration matrix."""
    config = _config(M, C, T, N, policy, seed)

    assert bfs(kron_graph, seed, config, settings).distances == bfs_oracle(kron_graph, seed)

    ranks = pagerank(kron_graph, 0.85, 3, config, settings).ranks
    assert max(abs(a - b) for a, b in zip(ranks, pagerank_oracle(kron_graph, 0.85, 3))) < 1e-9

    forest = boruvka_mst(weighted_kron, config, settings)
    assert forest.total_weight == pytest.approx(sum(w for _, _, w in kruskal_mst(weighted_kron)), rel=1e-12)

    assert st_connectivity(kron_graph, seed, 100, config, settings).connected == st_oracle(kron_graph, seed, 100)

    assert is_proper_coloring(er_graph, boman_coloring(er_graph, config, settings).colors)


def test_union_find():
    """Union-find merges components once."""
    uf = UnionFind(4)
    assert uf.union(0, 1)
    assert not uf.union(1, 0)
    assert uf.find(0) == uf.find(1) != uf.find(2)
