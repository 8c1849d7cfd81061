"""
Level-synchronous BFS over atomic active messages (FF&MF).

For every frontier vertex u at level l the owner of u fires one message per
neighbour w carrying l+1. The operator lowers w's distance if the new one is
smaller and otherwise reports an algorithm-level failure. The next frontier
is read off the distance cells once the level is quiescent.
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from aam.algorithms.base import AlgorithmResult, build_runtime, check_vertex
from aam.core.graph import Graph
from aam.core.messages import FF_MF
from aam.core.runtime import AtomicContext, OperatorContext
from aam.core.txn import Cell
from aam.logging import get_logger
from aam.models import RunConfig
from aam.utils.config import Settings

logger = get_logger(__name__)

UNVISITED = math.inf


@dataclass
class BfsResult(AlgorithmResult):
    distances: List[float] = field(default_factory=list)
    levels: int = 0

    def reached(self) -> int:
        return sum(1 for d in self.distances if d != UNVISITED)


def bfs(
    graph: Graph,
    source: int,
    config: Optional[RunConfig] = None,
    settings: Optional[Settings] = None,
) -> BfsResult:
    """
    Breadth-first search from source.

    Args:
        graph: Input graph
        source: Start vertex
        config: Runtime knobs; config.visited_check skips operators whose
            target is already at least as close before any transaction starts

    Returns:
        BfsResult with distance[v] (UNVISITED when unreachable) and run stats
    """
    check_vertex(graph, source, "source")
    config = config or RunConfig()
    runtime = build_runtime(graph, config, settings)
    partition = runtime.partition
    distance = [Cell(UNVISITED) for _ in range(graph.n)]

    def relax(ctx: OperatorContext, v: int, params: Tuple) -> bool:
        new_dist = params[0]
        if ctx.read(distance[v]) > new_dist:
            ctx.write(distance[v], new_dist)
            return True
        ctx.fail()
        return False

    def relax_atomically(actx: AtomicContext, v: int, params: Tuple) -> bool:
        new_dist = params[0]
        current = actx.load(distance[v])
        while current > new_dist:
            if actx.cas(distance[v], current, new_dist):
                return True
            current = actx.load(distance[v])
        actx.fail()
        return False

    def not_closer(v: int, params: Tuple) -> bool:
        return distance[v].load() > params[0]

    op = runtime.register_operator(
        "bfs",
        relax,
        FF_MF,
        atomic_form=relax_atomically,
        precheck=not_closer if config.visited_check else None,
    )

    distance[source].store(0)
    frontier = [source]
    level = 0
    while frontier:
        for u in frontier:
            src = partition.owner(u)
            for w in graph.neighbors(u):
                runtime.seed(op, int(w), (level + 1,), src=src)
        runtime.run_to_quiescence()
        level += 1
        frontier = [v for v in range(graph.n) if distance[v].load() == level]
        logger.info("bfs level %d: frontier %d", level, len(frontier))

    return BfsResult(stats=runtime.stats, distances=[c.load() for c in distance], levels=level)
