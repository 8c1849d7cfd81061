"""
Benchmarks reproducing the experiment shapes at desk scale.

Every benchmark checks its result (oracle or replay) before a row is
produced, so a timing row for an incorrect run never exists. Times are the
simulated makespans of the cost model (ns); wall time is reported alongside.

Key functionality:
- bench_single_vertex: CAS marking / ACC increments on shared vertices, one row per mechanism
- bench_coarsen_sweep: BFS over a range of coarsening factors M
- bench_thread_sweep: BFS over a range of worker-thread counts T
- bench_coalesce_sweep: Remote marking / increments over a range of coalescing factors C
- bench_distributed: Ownership-protocol scenarios o1..o4
- bench_algorithm: One algorithm run checked against its oracle
- bench_pr_scaling: Distributed PageRank scaling N, T or vertices per process
- cost_sweep: Activity-size sweep producing CostSamples for the linear model
"""

import math
import random
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from aam.algorithms.bfs import bfs
from aam.algorithms.boruvka import boruvka_mst
from aam.algorithms.coloring import boman_coloring
from aam.algorithms.oracles import (
    bfs_oracle,
    is_proper_coloring,
    kruskal_mst,
    pagerank_oracle,
    st_oracle,
)
from aam.algorithms.pagerank import DEFAULT_DAMPING, pagerank
from aam.algorithms.st_connectivity import st_connectivity
from aam.core.cost import CostMeter, CostModel, metering
from aam.core.errors import ConfigError, ValidationError
from aam.core.graph import (
    Graph,
    Partition,
    build_csr,
    generate_erdos_renyi,
    partition_1d,
    synthesize_weights,
)
from aam.core.messages import FF_AS
from aam.core.ownership import OwnershipManager, marks_replay
from aam.core.perf_model import CostSample
from aam.core.runtime import AAMRuntime, AtomicContext, OperatorContext
from aam.core.scheduler import StepScheduler
from aam.core.stats import RunStats
from aam.core.txn import (
    Cell,
    SerializationDomain,
    TxnContext,
    TxnEngine,
    atomic_acc,
    atomic_cas,
    make_policy,
    txn_read,
    txn_write,
)
from aam.logging import get_logger
from aam.models import RunConfig
from aam.utils.config import Settings
from aam.utils.helpers import build_id

logger = get_logger(__name__)

# (transactions per process, local vertices, remote vertices)
SCENARIOS: Dict[str, Tuple[int, int, int]] = {
    "o1": (1_000, 5, 1),
    "o2": (10_000, 5, 1),
    "o3": (1_000, 7, 3),
    "o4": (10_000, 7, 3),
}

SINGLE_VERTEX_MECHANISMS = ("atomics", "rtm", "hle", "bgq-short", "bgq-long", "locks")
DEFAULT_SWEEP_SIZES = (1, 2, 4, 8, 16, 24, 32, 48, 60)

Row = Dict[str, Any]


def run_parallel(
    tasks: Sequence[Callable[[], Any]],
    deterministic: bool,
    seed: int,
    cost_model: CostModel,
) -> List[float]:
    """
    Run tasks concurrently, each with its own cost meter.

    Returns:
        Simulated ns charged by each task
    """
    def metered(task: Callable[[], Any]) -> Callable[[], float]:
        def run() -> float:
            meter = CostMeter(cost_model)
            with metering(meter):
                task()
            return meter.elapsed_ns
        return run

    wrapped = [metered(t) for t in tasks]
    if deterministic:
        return StepScheduler(seed=seed).run(wrapped)
    with ThreadPoolExecutor(max_workers=max(1, len(wrapped))) as pool:
        futures = [pool.submit(w) for w in wrapped]
        return [f.result() for f in futures]


def _stamp(benchmark: str, seed: int, row: Row) -> Row:
    return {"benchmark": benchmark, **row, "seed": seed, "build_id": build_id()}


def bench_single_vertex(
    kind: str,
    contention: int = 10,
    threads: int = 4,
    mechanisms: Sequence[str] = SINGLE_VERTEX_MECHANISMS,
    seed: int = 0,
    repetitions: int = 10,
    vertices: int = 8,
    settings: Optional[Settings] = None,
    deterministic: bool = True,
) -> Tuple[List[Row], Dict[str, RunStats]]:
    """
    T threads mark (cas) or increment (acc) shared vertices, each vertex
    `contention` times in total.

    Returns:
        (one row per mechanism, RunStats per mechanism)

    Raises:
        ValidationError: A vertex ended in the wrong state
    """
    if kind not in ("cas", "acc"):
        raise ConfigError(f"single-vertex kind must be cas or acc, got '{kind}'")
    settings = settings or Settings()
    cost_model = CostModel(settings.cost)
    ops = [v for v in range(vertices) for _ in range(contention)]
    per_thread = [ops[t::threads] for t in range(threads)]
    ops_per_thread = max(len(p) for p in per_thread)

    rows: List[Row] = []
    all_stats: Dict[str, RunStats] = {}
    for mechanism in mechanisms:
        stats = RunStats()
        policy = make_policy(mechanism, settings)
        makespans = []
        started = time.perf_counter()
        for rep in range(repetitions):
            cells = [Cell(0) for _ in range(vertices)]
            engine = TxnEngine(settings, SerializationDomain(0), seed=seed + rep)

            def apply(v: int, cells=cells, engine=engine) -> None:
                cell = cells[v]
                if policy.uses_atomics:
                    stats.add(atomics=1)
                    if kind == "cas":
                        atomic_cas(cell, 0, 1)
                    else:
                        atomic_acc(cell, 1, "sum")
                    return

                def body(ctx: TxnContext) -> None:
                    current = txn_read(ctx, cell)
                    if kind == "acc":
                        txn_write(ctx, cell, current + 1)
                    elif current == 0:
                        txn_write(ctx, cell, 1)

                engine.execute(body, policy, stats)

            tasks = [lambda mine=mine: [apply(v) for v in mine] for mine in per_thread]
            elapsed = run_parallel(tasks, deterministic, seed * 7_777 + rep, cost_model)

            expected = contention if kind == "acc" else 1
            if any(c.load() != expected for c in cells):
                raise ValidationError(f"single-vertex-{kind} under {mechanism}: lost updates")
            makespans.append(max(elapsed))

        stats.add(sim_time_ns=sum(makespans), wall_time_s=time.perf_counter() - started)
        all_stats[mechanism] = stats
        row = {
            "kind": kind,
            "mechanism": mechanism,
            "contention": contention,
            "threads": threads,
            "vertices": vertices,
            "repetitions": repetitions,
            "mean_time_ns": statistics.mean(makespans) / ops_per_thread,
            **stats.as_row(),
            **{f"abort_pct_{k}": round(v, 3) for k, v in stats.abort_breakdown().items()},
        }
        rows.append(_stamp(f"single-vertex-{kind}", seed, row))
        logger.info("single-vertex-%s %s: %.1f ns/op", kind, mechanism, row["mean_time_ns"])
    return rows, all_stats


def pick_source(graph: Graph, seed: int = 0) -> int:
    """A random non-isolated vertex (vertex 0 for an edgeless graph)."""
    candidates = [v for v in range(graph.n) if graph.degree(v)]
    if not candidates:
        return 0
    return random.Random(seed).choice(candidates)


def _median_bfs(
    graph: Graph,
    source: int,
    expected: List[float],
    configs: Sequence[RunConfig],
    settings: Optional[Settings],
) -> Tuple[float, float, RunStats]:
    """Run BFS once per config; (time_ns, time_per_vertex_ns, stats) of the median run."""
    runs = []
    for config in configs:
        result = bfs(graph, source, config, settings)
        if result.distances != expected:
            raise ValidationError(
                f"BFS with M={config.coarsen}, T={config.threads} disagrees with the oracle"
            )
        executed = max(1, result.stats.operators_executed)
        runs.append((result.stats.sim_time_ns, result.stats.sim_time_ns / executed, result.stats))
    runs.sort(key=lambda r: r[0])
    return runs[len(runs) // 2]


def bench_coarsen_sweep(
    graph: Graph,
    m_values: Sequence[int],
    threads: int = 1,
    policy: str = "rtm",
    seed: int = 0,
    repetitions: int = 3,
    settings: Optional[Settings] = None,
    deterministic: bool = True,
    source: Optional[int] = None,
    graph_spec: str = "",
) -> List[Row]:
    """
    Full BFS per coarsening factor M; median over repetitions.

    Raises:
        ValidationError: A BFS disagreed with the sequential oracle
    """
    source = pick_source(graph, seed) if source is None else source
    expected = bfs_oracle(graph, source)
    rows: List[Row] = []
    for M in m_values:
        configs = [
            RunConfig(coarsen=M, threads=threads, policy=policy, seed=seed + rep, deterministic=deterministic)
            for rep in range(repetitions)
        ]
        time_ns, per_vertex_ns, stats = _median_bfs(graph, source, expected, configs, settings)
        row = {
            "graph": graph_spec,
            "M": M,
            "threads": threads,
            "policy": policy,
            "source": source,
            "repetitions": repetitions,
            "time_ns": time_ns,
            "time_per_vertex_ns": per_vertex_ns,
            **stats.as_row(),
        }
        rows.append(_stamp("coarsen-sweep", seed, row))
        logger.info("coarsen-sweep M=%d: %.1f ns/vertex", M, per_vertex_ns)
    return rows


def bench_thread_sweep(
    graph: Graph,
    t_values: Sequence[int],
    coarsen: int = 16,
    policy: str = "rtm",
    seed: int = 0,
    repetitions: int = 3,
    settings: Optional[Settings] = None,
    deterministic: bool = True,
    source: Optional[int] = None,
    graph_spec: str = "",
) -> List[Row]:
    """
    Full BFS per worker-thread count T at a fixed M; median over repetitions.

    speedup is relative to the first T of the sweep.

    Raises:
        ValidationError: A BFS disagreed with the sequential oracle
    """
    source = pick_source(graph, seed) if source is None else source
    expected = bfs_oracle(graph, source)
    rows: List[Row] = []
    baseline: Optional[float] = None
    for T in t_values:
        configs = [
            RunConfig(coarsen=coarsen, threads=T, policy=policy, seed=seed + rep, deterministic=deterministic)
            for rep in range(repetitions)
        ]
        time_ns, per_vertex_ns, stats = _median_bfs(graph, source, expected, configs, settings)
        baseline = time_ns if baseline is None else baseline
        row = {
            "graph": graph_spec,
            "M": coarsen,
            "threads": T,
            "policy": policy,
            "source": source,
            "repetitions": repetitions,
            "time_ns": time_ns,
            "time_per_vertex_ns": per_vertex_ns,
            "speedup": baseline / time_ns if time_ns else 0.0,
            **stats.as_row(),
        }
        rows.append(_stamp("thread-sweep", seed, row))
        logger.info("thread-sweep T=%d: %.2fx", T, row["speedup"])
    return rows


def _remote_targets(partition: Partition, ops_per_process: int, fan_in: bool, seed: int) -> Dict[int, List[int]]:
    """Remote vertices each sender touches; fan_in aims every sender at the last process."""
    N = partition.N
    targets: Dict[int, List[int]] = {}
    for p in range(N):
        if fan_in:
            if p == N - 1:
                continue
            pool = list(partition.local_vertices(N - 1))
        else:
            pool = [v for q in range(N) if q != p for v in partition.local_vertices(q)]
        rng = random.Random(seed * 1_000_003 + p)
        targets[p] = [rng.choice(pool) for _ in range(ops_per_process)]
    return targets


def _run_remote_workload(
    partition: Partition,
    targets: Dict[int, List[int]],
    kind: str,
    config: RunConfig,
    settings: Settings,
) -> RunStats:
    runtime = AAMRuntime(partition, config, settings)
    cells = [Cell(0) for _ in range(partition.n)]

    def touch(ctx: OperatorContext, v: int, params: Tuple) -> None:
        current = ctx.read(cells[v])
        if kind == "acc":
            ctx.write(cells[v], current + 1)
        elif current == 0:
            ctx.write(cells[v], 1)

    def touch_atomically(actx: AtomicContext, v: int, params: Tuple) -> None:
        if kind == "acc":
            actx.acc(cells[v], 1, "sum")
        else:
            actx.cas(cells[v], 0, 1)

    touch_op = runtime.register_operator(f"remote-{kind}", touch, FF_AS, atomic_form=touch_atomically)

    def issue(ctx: OperatorContext, v: int, params: Tuple) -> None:
        for t in params:
            ctx.spawn(touch_op, t)

    def issue_atomically(actx: AtomicContext, v: int, params: Tuple) -> None:
        for t in params:
            actx.spawn(touch_op, t)

    issue_op = runtime.register_operator("issue", issue, FF_AS, atomic_form=issue_atomically)
    for p, ts in targets.items():
        runtime.seed(issue_op, partition.local_vertices(p)[0], tuple(ts), src=p)
    stats = runtime.run_to_quiescence()

    counts = marks_replay(partition.n, [tuple(ts) for ts in targets.values()])
    for v, count in enumerate(counts):
        expected = count if kind == "acc" else int(count > 0)
        if cells[v].load() != expected:
            raise ValidationError(f"remote {kind}: vertex {v} is {cells[v].load()}, expected {expected}")
    return stats


def bench_coalesce_sweep(
    procs: int,
    c_values: Sequence[int],
    kind: str = "acc",
    policy: str = "rtm",
    fan_in: bool = False,
    ops_per_process: int = 256,
    vertices_per_process: int = 64,
    seed: int = 0,
    settings: Optional[Settings] = None,
    deterministic: bool = True,
) -> List[Row]:
    """
    Remote marking / increments sweeping the coalescing factor C.

    The first row is the single-element remote atomics baseline; one row per
    C follows for coalesced activities (M = C at the receiver).
    """
    if procs < 2:
        raise ConfigError("coalescing needs at least two processes")
    if kind not in ("cas", "acc"):
        raise ConfigError(f"remote kind must be cas or acc, got '{kind}'")
    settings = settings or Settings()
    partition = partition_1d(procs * vertices_per_process, procs)
    targets = _remote_targets(partition, ops_per_process, fan_in, seed)
    total_ops = sum(len(ts) for ts in targets.values())
    issuers = len(targets)

    def row_for(mechanism: str, C: int, stats: RunStats) -> Row:
        return _stamp("coalesce-sweep", seed, {
            "kind": kind,
            "mechanism": mechanism,
            "C": C,
            "procs": procs,
            "fan_in": fan_in,
            "ops": total_ops,
            "delivered_ops": stats.operators_executed - issuers,
            "time_ns": stats.sim_time_ns,
            "time_per_op_ns": stats.sim_time_ns / max(1, total_ops),
            **stats.as_row(),
        })

    baseline = _run_remote_workload(
        partition, targets, kind,
        RunConfig(procs=procs, coalesce=1, coarsen=1, policy="atomics", seed=seed, deterministic=deterministic),
        settings,
    )
    rows = [row_for("atomics", 1, baseline)]
    for C in c_values:
        stats = _run_remote_workload(
            partition, targets, kind,
            RunConfig(procs=procs, coalesce=C, coarsen=C, policy=policy, seed=seed, deterministic=deterministic),
            settings,
        )
        rows.append(row_for("aam", C, stats))
        logger.info("coalesce-sweep C=%d: %.1f ns/op", C, rows[-1]["time_per_op_ns"])
    return rows


def coalescing_crossover(rows: Sequence[Row]) -> Optional[int]:
    """Smallest C whose coalesced activities beat the remote atomics baseline."""
    baseline = next(r["time_ns"] for r in rows if r["mechanism"] == "atomics")
    wins = [r["C"] for r in rows if r["mechanism"] == "aam" and r["time_ns"] < baseline]
    return min(wins) if wins else None


def bench_distributed(
    scenario: str,
    procs: int = 2,
    policy: str = "rtm",
    seed: int = 0,
    settings: Optional[Settings] = None,
    deterministic: bool = True,
    vertices_per_process: int = 1024,
    transactions: Optional[int] = None,
) -> List[Row]:
    """
    Each process runs x transactions over a local and b remote random vertices
    (marking = incrementing a counter) through the ownership protocol.

    Raises:
        ValidationError: Final counters differ from the sequential replay
    """
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario '{scenario}' (expected {', '.join(SCENARIOS)})")
    x, a, b = SCENARIOS[scenario]
    x = transactions if transactions is not None else x
    if procs < 2 and b:
        raise ConfigError("distributed scenarios need at least two processes")
    if vertices_per_process < a:
        raise ConfigError("vertices_per_process must be at least the local footprint")

    settings = settings or Settings()
    run_policy = make_policy(policy, settings)
    partition = partition_1d(procs * vertices_per_process, procs)
    cells = [Cell(0) for _ in range(partition.n)]
    manager = OwnershipManager(cells, partition, settings, seed)
    stats = RunStats()
    engines = [TxnEngine(settings, SerializationDomain(p), seed=seed * 31 + p) for p in range(procs)]

    plans: List[List[Tuple[Tuple[int, ...], Tuple[int, ...]]]] = []
    for p in range(procs):
        rng = random.Random(seed * 1_000_003 + p)
        local_range = partition.local_vertices(p)
        remote_pool = [v for v in range(partition.n) if v not in local_range]
        plans.append([
            (tuple(rng.sample(local_range, a)), tuple(rng.sample(remote_pool, b)))
            for _ in range(x)
        ])

    def mark(ctx: TxnContext, view: Dict[int, Cell]) -> None:
        for cell in view.values():
            txn_write(ctx, cell, txn_read(ctx, cell) + 1)

    committed = [0] * procs

    def process_task(p: int) -> None:
        for local, remote in plans[p]:
            manager.run_distributed_txn(p, local, remote, mark, run_policy, engines[p], stats)
            committed[p] += 1

    started = time.perf_counter()
    elapsed = run_parallel(
        [lambda p=p: process_task(p) for p in range(procs)],
        deterministic, seed, CostModel(settings.cost),
    )
    stats.add(sim_time_ns=max(elapsed), wall_time_s=time.perf_counter() - started)

    replay = marks_replay(partition.n, [loc + rem for plan in plans for loc, rem in plan])
    if [c.load() for c in cells] != replay:
        raise ValidationError(f"scenario {scenario}: final marks differ from sequential replay")
    if manager.holders() or any(c.marker is not None for c in cells):
        raise ValidationError(f"scenario {scenario}: markers left held")
    if any(c != x for c in committed):
        raise ValidationError(f"scenario {scenario}: commit counts {committed}, expected {x} each")

    row = {
        "scenario": scenario,
        "x": x,
        "a": a,
        "b": b,
        "procs": procs,
        "policy": policy,
        "commits_per_process": min(committed),
        "time_ns": stats.sim_time_ns,
        **stats.as_row(),
    }
    logger.info("scenario %s: %d backoffs", scenario, stats.backoffs)
    return [_stamp("distributed-scenario", seed, row)]


def bench_algorithm(
    algorithm: str,
    graph: Graph,
    config: RunConfig,
    settings: Optional[Settings] = None,
    source: Optional[int] = None,
    target: Optional[int] = None,
    damping: float = DEFAULT_DAMPING,
    iterations: int = 10,
    graph_spec: str = "",
) -> Tuple[Row, Any]:
    """
    Run one algorithm, check it against its oracle, and describe the run.

    Returns:
        (row, algorithm result)

    Raises:
        ValidationError: Result disagrees with the oracle (or coloring is improper)
    """
    source = pick_source(graph, config.seed) if source is None else source
    summary: Row = {"graph": graph_spec, "algorithm": algorithm}

    if algorithm == "bfs":
        result = bfs(graph, source, config, settings)
        if result.distances != bfs_oracle(graph, source):
            raise ValidationError("BFS distances disagree with the oracle")
        summary.update(source=source, reached=result.reached(), levels=result.levels)
    elif algorithm == "pr":
        result = pagerank(graph, damping, iterations, config, settings)
        expected = pagerank_oracle(graph, damping, iterations)
        error = max((abs(x - y) for x, y in zip(result.ranks, expected)), default=0.0)
        if error >= 1e-9:
            raise ValidationError(f"PageRank differs from the oracle by {error:.3e}")
        summary.update(damping=damping, iterations=iterations, max_error=error)
    elif algorithm == "mst":
        weighted = graph if graph.weights is not None else synthesize_weights(graph, config.seed)
        result = boruvka_mst(weighted, config, settings)
        expected_weight = sum(w for _, _, w in kruskal_mst(weighted))
        if not math.isclose(result.total_weight, expected_weight, rel_tol=1e-12, abs_tol=1e-12):
            raise ValidationError(f"MST weight {result.total_weight} != oracle {expected_weight}")
        summary.update(mst_edges=len(result.edges), mst_weight=result.total_weight)
    elif algorithm == "st":
        target = (graph.n - 1 if target is None else target)
        result = st_connectivity(graph, source, target, config, settings)
        if result.connected != st_oracle(graph, source, target):
            raise ValidationError("st-connectivity verdict disagrees with the oracle")
        summary.update(s=source, t=target, verdict=result.verdict.value)
    elif algorithm == "color":
        result = boman_coloring(graph, config, settings)
        if not is_proper_coloring(graph, result.colors):
            raise ValidationError("coloring has monochromatic edges")
        if result.num_colors > graph.max_degree() + 1:
            raise ValidationError("coloring uses more than max_degree + 1 colors")
        summary.update(colors=result.num_colors, recolors=result.recolors)
    else:
        raise ConfigError(f"unknown algorithm '{algorithm}'")

    row = {
        **summary,
        "M": config.coarsen,
        "C": config.coalesce,
        "threads": config.threads,
        "procs": config.procs,
        "policy": config.policy,
        **result.stats.as_row(),
    }
    return _stamp("algorithm-run", config.seed, row), result


PR_SCALING_AXES = ("procs", "threads", "vertices")


def bench_pr_scaling(
    axis: str,
    values: Sequence[int],
    procs: int = 4,
    threads: int = 1,
    vertices_per_process: int = 256,
    edge_probability: float = 0.005,
    coalesce: int = 16,
    policy: str = "rtm",
    iterations: int = 5,
    damping: float = DEFAULT_DAMPING,
    seed: int = 0,
    settings: Optional[Settings] = None,
    deterministic: bool = True,
) -> List[Row]:
    """
    Distributed PageRank on G(N·|V_i|, p), scaling one of N, T or |V_i|.

    The other two stay at their given values, so scaling N or |V_i| grows
    the graph with the machine (weak scaling). Activities are coarsened to C
    operators at the receiver.

    Raises:
        ConfigError: Unknown axis
        ValidationError: Ranks differ from the oracle
    """
    if axis not in PR_SCALING_AXES:
        raise ConfigError(f"unknown scaling axis '{axis}' (expected {', '.join(PR_SCALING_AXES)})")
    rows: List[Row] = []
    for value in values:
        N = value if axis == "procs" else procs
        T = value if axis == "threads" else threads
        per_process = value if axis == "vertices" else vertices_per_process
        n = N * per_process
        spec = f"er:{n},{edge_probability}"
        graph = build_csr(generate_erdos_renyi(n, edge_probability, seed))
        config = RunConfig(
            coarsen=coalesce, coalesce=coalesce, threads=T, procs=N,
            policy=policy, seed=seed, deterministic=deterministic,
        )
        run_row, result = bench_algorithm(
            "pr", graph, config, settings, damping=damping, iterations=iterations, graph_spec=spec
        )
        row = {
            "axis": axis,
            "procs": N,
            "threads": T,
            "vertices_per_process": per_process,
            "n": n,
            "edges": graph.num_edges,
            "C": coalesce,
            "iterations": iterations,
            "max_error": run_row["max_error"],
            "time_ns": result.stats.sim_time_ns,
            "time_per_edge_ns": result.stats.sim_time_ns / max(1, graph.num_edges * iterations),
            **result.stats.as_row(),
        }
        rows.append(_stamp("pr-scaling", seed, row))
        logger.info("pr-scaling %s=%d: %.0f ns", axis, value, row["time_ns"])
    return rows


def cost_sweep(
    sizes: Sequence[int] = DEFAULT_SWEEP_SIZES,
    threads: int = 4,
    policy: str = "rtm",
    activities: int = 20,
    pool: int = 1 << 16,
    seed: int = 0,
    settings: Optional[Settings] = None,
    deterministic: bool = True,
) -> List[CostSample]:
    """
    Time activities that modify N random vertices, as atomics and as transactions.

    Returns:
        One CostSample per (mechanism, N): simulated ns per activity
    """
    settings = settings or Settings()
    cost_model = CostModel(settings.cost)
    htm_policy = make_policy(policy, settings)
    samples: List[CostSample] = []
    for mechanism in ("atomics", "htm"):
        for N in sizes:
            cells = [Cell(0) for _ in range(pool)]
            rng = random.Random(seed * 65_537 + N)
            plans = [[rng.sample(range(pool), N) for _ in range(activities)] for _ in range(threads)]
            engine = TxnEngine(settings, SerializationDomain(0), seed=seed + N)
            stats = RunStats()

            def run_plan(plan: List[List[int]], cells=cells, engine=engine, stats=stats) -> None:
                for activity in plan:
                    if mechanism == "atomics":
                        for v in activity:
                            atomic_acc(cells[v], 1, "sum")
                        continue

                    def body(ctx: TxnContext, activity=activity) -> None:
                        for v in activity:
                            txn_write(ctx, cells[v], txn_read(ctx, cells[v]) + 1)

                    engine.execute(body, htm_policy, stats)

            elapsed = run_parallel(
                [lambda plan=plan: run_plan(plan) for plan in plans], deterministic, seed + N, cost_model
            )
            if sum(c.load() for c in cells) != threads * activities * N:
                raise ValidationError(f"cost sweep lost updates at N={N} ({mechanism})")
            samples.append(CostSample(n_vertices=N, mean_time=max(elapsed) / activities, mechanism=mechanism))
    return samples
