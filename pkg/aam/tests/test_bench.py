"""
Tests for the benchmark drivers. Sizes are kept small; the drivers validate
their own results, so a returned row already implies a correct run.
"""

import pytest

from aam.core.bench import (
    SCENARIOS,
    SINGLE_VERTEX_MECHANISMS,
    bench_algorithm,
    bench_coalesce_sweep,
    bench_coarsen_sweep,
    bench_distributed,
    bench_pr_scaling,
    bench_single_vertex,
    bench_thread_sweep,
    coalescing_crossover,
    cost_sweep,
    pick_source,
)
from aam.core.errors import ConfigError
from aam.core.graph import EdgeList, build_csr
from aam.core.perf_model import crossing_point, fit_linear, split_by_mechanism
from aam.models import RunConfig


class TestSingleVertex:
    """Contended CAS marking and ACC increments."""

    @pytest.mark.parametrize("kind", ["cas", "acc"])
    def test_one_row_per_mechanism(self, kind, settings):
        """Rows come back in mechanism order, stamped with seed and build id."""
        rows, stats = bench_single_vertex(kind, repetitions=2, settings=settings)

        assert [r["mechanism"] for r in rows] == list(SINGLE_VERTEX_MECHANISMS)
        assert set(stats) == set(SINGLE_VERTEX_MECHANISMS)
        for row in rows:
            assert row["benchmark"] == f"single-vertex-{kind}"
            assert row["seed"] == 0
            assert row["build_id"]
            assert row["mean_time_ns"] > 0
            assert row["total_aborts"] == row["aborts_conflict"] + row["aborts_capacity"] + row["aborts_other"]

    def test_single_thread_never_conflicts(self, settings):
        """With T=1 there is nobody to conflict with."""
        _, stats = bench_single_vertex("cas", threads=1, repetitions=2, settings=settings)

        for mechanism in ("rtm", "hle", "bgq-short", "bgq-long"):
            assert stats[mechanism].aborts_conflict == 0
            assert stats[mechanism].serializations == 0

    def test_atomics_use_no_transactions(self, settings):
        """The atomics mechanism issues one atomic per operation and no commits."""
        _, stats = bench_single_vertex("acc", mechanisms=["atomics"], repetitions=1, settings=settings)

        assert stats["atomics"].atomics == 80
        assert stats["atomics"].commits == 0

    @pytest.mark.parametrize("mechanism", ["rtm", "bgq-short"])
    def test_increments_conflict_more_than_marks(self, mechanism, settings):
        """Every increment writes; only the first mark of a vertex does, so ACC aborts on conflicts more often."""
        _, cas = bench_single_vertex(
            "cas", contention=100, threads=8, mechanisms=[mechanism], repetitions=3, settings=settings
        )
        _, acc = bench_single_vertex(
            "acc", contention=100, threads=8, mechanisms=[mechanism], repetitions=3, settings=settings
        )

        assert acc[mechanism].aborts_conflict > cas[mechanism].aborts_conflict

    def test_bad_kind(self):
        """Only cas and acc exist."""
        with pytest.raises(ConfigError):
            bench_single_vertex("swap")


class TestCoarsenSweep:
    """BFS over coarsening factors."""

    def test_coarsening_lowers_time_per_vertex(self, kron_graph, settings):
        """M=16 beats M=1 at a single thread."""
        source = pick_source(kron_graph)
        rows = bench_coarsen_sweep(kron_graph, [1, 16], repetitions=1, settings=settings, source=source)

        assert [r["M"] for r in rows] == [1, 16]
        assert rows[1]["time_per_vertex_ns"] < rows[0]["time_per_vertex_ns"]
        assert all(r["source"] == source for r in rows)

    def test_source_is_picked_when_missing(self, kron_graph, settings):
        """A non-isolated source is chosen from the seed."""
        rows = bench_coarsen_sweep(kron_graph, [4], repetitions=1, settings=settings, seed=2)
        assert rows[0]["source"] == pick_source(kron_graph, 2)
        assert kron_graph.degree(rows[0]["source"]) > 0

    def test_time_per_vertex_never_rises_up_to_m16(self, kron_graph, settings):
        """Median of three runs per M: doubling M from 1 to 16 never costs more per vertex."""
        rows = bench_coarsen_sweep(kron_graph, [1, 2, 4, 8, 16], repetitions=3, settings=settings)

        per_vertex = [r["time_per_vertex_ns"] for r in rows]
        assert all(later <= earlier for earlier, later in zip(per_vertex, per_vertex[1:]))
        assert all(r["repetitions"] == 3 for r in rows)


class TestThreadSweep:
    """BFS over worker-thread counts at a fixed M."""

    def test_more_threads_speed_up(self, kron_graph, settings):
        """Four workers finish the same BFS in less simulated time than one."""
        rows = bench_thread_sweep(kron_graph, [1, 4], coarsen=4, repetitions=1, settings=settings)

        assert [r["threads"] for r in rows] == [1, 4]
        assert rows[0]["speedup"] == pytest.approx(1.0)
        assert rows[1]["speedup"] > 1.0
        assert {r["benchmark"] for r in rows} == {"thread-sweep"}
        assert {r["M"] for r in rows} == {4}

    def test_source_shared_across_rows(self, kron_graph, settings):
        """Every T searches from the same source."""
        rows = bench_thread_sweep(kron_graph, [1, 2], coarsen=2, repetitions=1, settings=settings, seed=3)
        assert {r["source"] for r in rows} == {pick_source(kron_graph, 3)}


class TestPrScaling:
    """Distributed PageRank scaling along one axis."""

    @pytest.mark.parametrize("axis,column,values", [
        ("procs", "procs", [2, 3]),
        ("threads", "threads", [1, 2]),
        ("vertices", "vertices_per_process", [8, 12]),
    ])
    def test_axis(self, axis, column, values, settings):
        """Only the scaled axis moves; the graph has N * |V_i| vertices."""
        rows = bench_pr_scaling(
            axis, values, procs=2, threads=1, vertices_per_process=16,
            edge_probability=0.2, coalesce=4, iterations=3, settings=settings,
        )

        assert [r[column] for r in rows] == values
        for row in rows:
            assert row["benchmark"] == "pr-scaling"
            assert row["axis"] == axis
            assert row["n"] == row["procs"] * row["vertices_per_process"]
            assert row["C"] == 4
            assert row["time_ns"] > 0

    def test_weak_scaling_grows_the_graph(self, settings):
        """More processes at a fixed |V_i| means more vertices and more messages."""
        rows = bench_pr_scaling(
            "procs", [2, 4], vertices_per_process=16, edge_probability=0.2,
            coalesce=2, iterations=2, settings=settings,
        )

        assert rows[1]["n"] == 2 * rows[0]["n"]
        assert rows[1]["messages_sent"] > rows[0]["messages_sent"]

    def test_unknown_axis(self):
        """Only procs, threads and vertices can be scaled."""
        with pytest.raises(ConfigError):
            bench_pr_scaling("edges", [1])


def test_pick_source_of_edgeless_graph():
    """An edgeless graph falls back to vertex 0."""
    assert pick_source(build_csr(EdgeList.from_tuples(3, []))) == 0


class TestCoalesceSweep:
    """Remote operations over coalescing factors."""

    def test_rows_and_crossover(self, costly_network):
        """Coalescing many messages per batch beats single-message atomics on a costly network."""
        rows = bench_coalesce_sweep(
            2, [1, 16], ops_per_process=64, vertices_per_process=32, settings=costly_network
        )

        assert [(r["mechanism"], r["C"]) for r in rows] == [("atomics", 1), ("aam", 1), ("aam", 16)]
        assert {r["delivered_ops"] for r in rows} == {128}
        assert rows[1]["messages_sent"] == rows[0]["messages_sent"] == 128
        assert rows[2]["batches_sent"] < rows[1]["batches_sent"]
        assert coalescing_crossover(rows) == 16

    def test_cas_marks(self, settings):
        """Remote CAS marking validates against the replay."""
        rows = bench_coalesce_sweep(
            2, [4], kind="cas", ops_per_process=32, vertices_per_process=8, settings=settings
        )
        assert rows[-1]["delivered_ops"] == 64

    def test_fan_in(self, settings):
        """In fan-in mode every process but the last sends to the last."""
        rows = bench_coalesce_sweep(
            3, [8], fan_in=True, ops_per_process=16, vertices_per_process=8, settings=settings
        )

        assert rows[0]["ops"] == 32
        assert all(r["fan_in"] for r in rows)

    def test_no_crossover(self):
        """Without a winning C there is no crossover."""
        rows = [
            {"mechanism": "atomics", "C": 1, "time_ns": 10.0},
            {"mechanism": "aam", "C": 1, "time_ns": 20.0},
        ]
        assert coalescing_crossover(rows) is None

    def test_needs_two_processes(self):
        """A single process has nobody to message."""
        with pytest.raises(ConfigError):
            bench_coalesce_sweep(1, [1])


class TestDistributed:
    """Ownership-protocol scenarios."""

    @pytest.mark.parametrize("scenario", ["o1", "o3"])
    def test_scenario(self, scenario, settings):
        """Every process commits all of its transactions and the marks match the replay."""
        rows = bench_distributed(
            scenario, procs=2, settings=settings, vertices_per_process=16, transactions=15
        )

        row = rows[0]
        assert row["benchmark"] == "distributed-scenario"
        assert row["commits_per_process"] == row["x"] == 15
        assert row["commits"] + row["serializations"] == 30

    def test_three_processes(self, settings):
        """More processes contend for the same small vertex pool."""
        rows = bench_distributed("o3", procs=3, settings=settings, vertices_per_process=8, transactions=6)
        assert rows[0]["procs"] == 3

    def test_more_remote_vertices_back_off_at_least_as_often(self, settings):
        """Three remote vertices per transaction contend for markers at least as much as one."""
        kwargs = dict(procs=4, settings=settings, vertices_per_process=16, transactions=50)
        o1 = bench_distributed("o1", **kwargs)[0]
        o3 = bench_distributed("o3", **kwargs)[0]

        assert o3["backoffs"] >= o1["backoffs"]

    @pytest.mark.slow
    @pytest.mark.parametrize("scenario", sorted(SCENARIOS))
    def test_full_transaction_counts(self, scenario, settings):
        """Every scenario commits its full x transactions on each process."""
        x, _, _ = SCENARIOS[scenario]
        rows = bench_distributed(scenario, procs=2, settings=settings)

        assert rows[0]["commits_per_process"] == rows[0]["x"] == x
        assert rows[0]["commits"] + rows[0]["serializations"] == 2 * x

    def test_unknown_scenario(self):
        """Only o1 to o4 exist."""
        with pytest.raises(ConfigError):
            bench_distributed("o9")

    def test_single_process_rejected(self):
        """Remote footprints need a second process."""
        with pytest.raises(ConfigError):
            bench_distributed("o1", procs=1)

    def test_footprint_larger_than_partition(self):
        """Each process must own enough vertices for its local footprint."""
        with pytest.raises(ConfigError):
            bench_distributed("o3", vertices_per_process=4)


class TestAlgorithmRun:
    """One validated algorithm run."""

    @pytest.mark.parametrize("algorithm", ["bfs", "pr", "mst", "st", "color"])
    def test_algorithms(self, algorithm, kron_graph, settings):
        """Each algorithm produces a stamped row carrying its configuration."""
        config = RunConfig(coarsen=4, coalesce=2, threads=2, procs=2, deterministic=True)
        row, result = bench_algorithm(
            algorithm, kron_graph, config, settings, iterations=3, graph_spec="kron:7,8"
        )

        assert row["benchmark"] == "algorithm-run"
        assert row["algorithm"] == algorithm
        assert (row["M"], row["C"], row["threads"], row["procs"]) == (4, 2, 2, 2)
        assert row["graph"] == "kron:7,8"
        assert result.stats.operators_executed > 0

    def test_unknown_algorithm(self, kron_graph):
        """Unknown algorithm names are configuration errors."""
        with pytest.raises(ConfigError):
            bench_algorithm("sssp", kron_graph, RunConfig(deterministic=True))


def test_cost_sweep_fits_the_linear_model(settings):
    """Both mechanisms fit a line well and the transactional line crosses below the atomics one."""
    grouped = split_by_mechanism(cost_sweep(sizes=[1, 4, 8, 16, 32, 60], activities=10, settings=settings))

    atomics, htm = fit_linear(grouped["atomics"]), fit_linear(grouped["htm"])

    assert atomics.r2 > 0.95 and htm.r2 > 0.95
    assert htm.intercept > atomics.intercept
    assert htm.slope < atomics.slope
    crossing = crossing_point(atomics, htm)
    assert crossing.exists
    assert 1 < crossing.n_star < 60


def test_cost_sweep_samples(settings):
    """One sample per mechanism and size."""
    samples = cost_sweep(sizes=[1, 4], threads=2, activities=4, pool=256, settings=settings)

    assert [(s.mechanism, s.n_vertices) for s in samples] == [
        ("atomics", 1), ("atomics", 4), ("htm", 1), ("htm", 4)
    ]
    assert all(s.mean_time > 0 for s in samples)
