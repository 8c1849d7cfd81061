"""
Boman-style speculative graph coloring (FR&MF).

Each process picks tentative colors for its own vertices greedily (smallest
color not used by a neighbour it knows about) and sends one operator per
vertex. The operator writes the color and looks for neighbours with the same
color. With exactly one such neighbour a coin decides which endpoint is
recolored; with several the vertex itself is. The returned vertex goes back
to the spawner, whose handler picks a fresh smallest free color for it and
sends another operator. NO_VERTEX means nothing needs recoloring.
"""

import random
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from aam.algorithms.base import AlgorithmResult, build_runtime
from aam.core.errors import WatchdogError
from aam.core.graph import Graph
from aam.core.messages import FR_MF, OperatorResult
from aam.core.runtime import AAMRuntime, OperatorContext
from aam.core.txn import Cell
from aam.logging import get_logger
from aam.models import RunConfig
from aam.utils.config import Settings

logger = get_logger(__name__)

UNCOLORED = -1
NO_VERTEX = -1


@dataclass
class ColoringResult(AlgorithmResult):
    colors: List[int] = field(default_factory=list)
    recolors: int = 0

    @property
    def num_colors(self) -> int:
        return len({c for c in self.colors if c != UNCOLORED})


def smallest_free_color(graph: Graph, v: int, known: Dict[int, int]) -> int:
    """Smallest color id not taken by any neighbour of v according to known."""
    taken = {known.get(int(w), UNCOLORED) for w in graph.neighbors(v)}
    c = 0
    while c in taken:
        c += 1
    return c


def boman_coloring(
    graph: Graph,
    config: Optional[RunConfig] = None,
    settings: Optional[Settings] = None,
    max_recolors: Optional[int] = None,
) -> ColoringResult:
    """
    Color graph so that no edge is monochromatic.

    Args:
        max_recolors: Give up after this many repair operators
            (default 100 · n + 100)

    Raises:
        WatchdogError: Repairs did not converge within max_recolors
    """
    config = config or RunConfig()
    runtime = build_runtime(graph, config, settings)
    partition = runtime.partition
    n = graph.n
    rng = random.Random(config.seed)
    color = [Cell(UNCOLORED) for _ in range(n)]
    budget = max_recolors if max_recolors is not None else 100 * n + 100
    recolors = 0

    def assign(ctx: OperatorContext, v: int, params: Tuple) -> int:
        new_color, coin = params
        ctx.write(color[v], new_color)
        clashes = [int(w) for w in graph.neighbors(v) if ctx.read(color[int(w)]) == new_color]
        if not clashes:
            return NO_VERTEX
        ctx.fail()
        if len(clashes) == 1:
            return clashes[0] if coin < 0.5 else v
        return v

    def on_result(rt: AAMRuntime, result: OperatorResult, spawner: int) -> None:
        nonlocal recolors
        victim = result.value
        if victim == NO_VERTEX:
            return
        recolors += 1
        if recolors > budget:
            raise WatchdogError(f"coloring did not converge after {budget} recolors")
        known = {int(w): color[int(w)].load() for w in graph.neighbors(victim)}
        rt.seed(op, victim, (smallest_free_color(graph, victim, known), rng.random()), src=spawner)

    op = runtime.register_operator("boman-assign", assign, FR_MF, handler=on_result)

    for pid in range(partition.N):
        tentative: Dict[int, int] = {}
        for v in partition.local_vertices(pid):
            tentative[v] = smallest_free_color(graph, v, tentative)
            runtime.seed(op, v, (tentative[v], rng.random()), src=pid)

    runtime.run_to_quiescence()
    colors = [c.load() for c in color]
    logger.info("coloring: %d colors, %d recolors", len({*colors}), recolors)
    return ColoringResult(stats=runtime.stats, colors=colors, recolors=recolors)
