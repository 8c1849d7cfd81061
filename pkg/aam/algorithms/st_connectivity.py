"""
s-t connectivity with two concurrent BFS waves (FR&AS).

The wave from s paints vertices GREY, the wave from t GREEN. An operator
that reaches a vertex already painted by the other wave returns True and
the spawner's handler cancels the run with the verdict "connected". Newly
painted vertices are reported back too and form the next frontier.
"""

from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple

from aam.algorithms.base import AlgorithmResult, build_runtime, check_vertex
from aam.core.errors import ContractError
from aam.core.graph import Graph
from aam.core.messages import FR_AS, OperatorResult
from aam.core.runtime import AAMRuntime, AtomicContext, OperatorContext
from aam.core.txn import Cell
from aam.logging import get_logger
from aam.models import RunConfig
from aam.utils.config import Settings

logger = get_logger(__name__)

WHITE, GREY, GREEN = 0, 1, 2


class Verdict(Enum):
    CONNECTED = "connected"
    DISCONNECTED = "disconnected"


@dataclass
class StResult(AlgorithmResult):
    verdict: Verdict = Verdict.DISCONNECTED

    @property
    def connected(self) -> bool:
        return self.verdict is Verdict.CONNECTED


def st_connectivity(
    graph: Graph,
    s: int,
    t: int,
    config: Optional[RunConfig] = None,
    settings: Optional[Settings] = None,
) -> StResult:
    """Decide whether s and t are in the same component of an undirected graph."""
    check_vertex(graph, s, "s")
    check_vertex(graph, t, "t")
    if graph.directed:
        raise ContractError("st-connectivity expects an undirected graph")

    runtime = build_runtime(graph, config, settings)
    if s == t:
        return StResult(stats=runtime.stats, verdict=Verdict.CONNECTED)

    partition = runtime.partition
    color = [Cell(WHITE) for _ in range(graph.n)]
    verdict = Verdict.DISCONNECTED
    next_frontier: List[Tuple[int, int]] = []

    def paint(ctx: OperatorContext, v: int, params: Tuple) -> Tuple[bool, bool]:
        new_color = params[0]
        current = ctx.read(color[v])
        if current == WHITE:
            ctx.write(color[v], new_color)
            return False, True
        return current != new_color, False

    def paint_atomically(actx: AtomicContext, v: int, params: Tuple) -> Tuple[bool, bool]:
        new_color = params[0]
        if actx.cas(color[v], WHITE, new_color):
            return False, True
        return actx.load(color[v]) != new_color, False

    def on_result(rt: AAMRuntime, result: OperatorResult, spawner: int) -> None:
        nonlocal verdict
        met, painted = result.value
        if met:
            verdict = Verdict.CONNECTED
            rt.cancel()
        elif painted:
            next_frontier.append((result.element, result.params[0]))

    op = runtime.register_operator(
        "st-paint", paint, FR_AS, handler=on_result, atomic_form=paint_atomically
    )

    color[s].store(GREY)
    color[t].store(GREEN)
    frontier = [(s, GREY), (t, GREEN)]
    level = 0
    while frontier and verdict is Verdict.DISCONNECTED:
        for u, c in frontier:
            src = partition.owner(u)
            for w in graph.neighbors(u):
                runtime.seed(op, int(w), (c,), src=src)
        next_frontier.clear()
        runtime.run_to_quiescence()
        frontier = list(next_frontier)
        level += 1
        logger.info("st level %d: frontier %d", level, len(frontier))

    return StResult(stats=runtime.stats, verdict=verdict)
