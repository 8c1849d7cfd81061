"""
Boruvka minimum spanning forest with fire-and-return, may-fail operators (FR&MF).

Every supervertex (union-find root) owns a weight-sorted tuple of incident
edges. Its operator drops edges that became internal, takes the lightest
remaining one and merges the two supervertices (smaller into larger),
concatenating their edge tuples. The edge is returned to the spawner, whose
handler records it and fires the operator again for the merged root. An
operator that runs on a vertex that is no longer a root fails; depending on
the handler policy the spawner retries at the current root, backs off first,
or drops it (the merging operator already re-fired the root).
"""

import heapq
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from aam.algorithms.base import AlgorithmResult, build_runtime
from aam.core.cost import charge_ns
from aam.core.errors import ConfigError, ContractError
from aam.core.graph import Graph
from aam.core.messages import FR_MF, OperatorResult
from aam.core.runtime import AAMRuntime, OperatorContext
from aam.core.txn import Cell
from aam.logging import get_logger
from aam.models import RunConfig
from aam.utils.config import Settings

logger = get_logger(__name__)

HANDLER_POLICIES = ("retry", "backoff", "drop")

# Failure payloads
NOT_ROOT = "not-root"
EXHAUSTED = "exhausted"

Edge = Tuple[float, int, int]  # (weight, lo, hi)


@dataclass
class MstResult(AlgorithmResult):
    edges: List[Tuple[int, int, float]] = field(default_factory=list)

    @property
    def total_weight(self) -> float:
        return sum(w for _, _, w in self.edges)


def _incident_edges(graph: Graph) -> List[Tuple[Edge, ...]]:
    adjacency = []
    for u in range(graph.n):
        entries = []
        for v, w in zip(graph.neighbors(u), graph.edge_weights(u)):
            v = int(v)
            entries.append((float(w), min(u, v), max(u, v)))
        adjacency.append(tuple(sorted(entries)))
    return adjacency


def boruvka_mst(
    graph: Graph,
    config: Optional[RunConfig] = None,
    settings: Optional[Settings] = None,
    handler_policy: str = "retry",
) -> MstResult:
    """
    Minimum spanning forest of an undirected graph with distinct weights.

    Args:
        graph: Undirected weighted graph
        handler_policy: What the spawner does with a failed operator:
            retry, backoff or drop

    Raises:
        ContractError: Graph is directed or unweighted
        ConfigError: Unknown handler policy
    """
    if graph.directed:
        raise ContractError("boruvka needs an undirected graph")
    if graph.weights is None:
        raise ContractError("boruvka needs edge weights (see synthesize_weights)")
    if handler_policy not in HANDLER_POLICIES:
        raise ConfigError(f"unknown handler policy '{handler_policy}'")

    runtime = build_runtime(graph, config, settings)
    n = graph.n
    parent = [Cell(v) for v in range(n)]
    size = [Cell(1) for _ in range(n)]
    edges = [Cell(adj) for adj in _incident_edges(graph)]
    mst: Dict[Tuple[int, int], float] = {}

    def find(ctx: OperatorContext, v: int) -> int:
        while True:
            p = ctx.read(parent[v])
            if p == v:
                return v
            v = p

    def find_now(v: int) -> int:
        while parent[v].load() != v:
            v = parent[v].load()
        return v

    def merge(ctx: OperatorContext, r: int, params: Tuple):
        if ctx.read(parent[r]) != r:
            ctx.fail()
            return (NOT_ROOT, r)

        incident = ctx.read(edges[r])
        skip = 0
        other = r
        for weight, lo, hi in incident:
            far = hi if find(ctx, lo) == r else lo
            other = find(ctx, far)
            if other != r:
                break
            skip += 1
        if other == r:
            if incident:
                ctx.write(edges[r], ())
            ctx.fail()
            return (EXHAUSTED, r)

        weight, lo, hi = incident[skip]
        big, small = (r, other) if ctx.read(size[r]) >= ctx.read(size[other]) else (other, r)
        # Both tuples are weight-sorted; internal edges are purged on a later scan
        merged = tuple(heapq.merge(incident[skip + 1:], ctx.read(edges[other])))
        ctx.write(parent[small], big)
        ctx.write(size[big], ctx.read(size[r]) + ctx.read(size[other]))
        ctx.write(edges[big], merged)
        ctx.write(edges[small], ())
        return (lo, hi, weight, big)

    def on_result(rt: AAMRuntime, result: OperatorResult, spawner: int) -> None:
        if not result.failed:
            lo, hi, weight, root = result.value
            mst[(lo, hi)] = weight
            rt.seed(merge_op, root, src=spawner)
            return
        reason, r = result.value
        if reason == EXHAUSTED or handler_policy == "drop":
            return
        if handler_policy == "backoff":
            rt.stats.add(backoffs=1)
            charge_ns(rt.settings.ownership_backoff_base_us * 1000.0)
        rt.seed(merge_op, find_now(r), src=spawner)

    merge_op = runtime.register_operator("boruvka-merge", merge, FR_MF, handler=on_result)

    for v in range(n):
        if graph.degree(v):
            runtime.seed(merge_op, v)
    runtime.run_to_quiescence()

    forest = sorted((lo, hi, w) for (lo, hi), w in mst.items())
    logger.info("boruvka: %d forest edges, weight %.6f", len(forest), sum(w for _, _, w in forest))
    return MstResult(stats=runtime.stats, edges=forest)
