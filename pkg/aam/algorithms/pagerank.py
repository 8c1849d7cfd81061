"""
PageRank with always-succeed fire-and-forget operators (FF&AS).

Each iteration snapshots the ranks, zeroes them, and runs one vertex-centric
operator per vertex: it adds the teleport term to its own rank and pushes
d · old_rank / out_deg to every neighbour. Contributions to vertices of other
processes travel as single-add messages. Vertices without out-edges push
nothing.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

from aam.algorithms.base import AlgorithmResult, build_runtime
from aam.core.errors import ContractError
from aam.core.graph import Graph
from aam.core.messages import FF_AS
from aam.core.runtime import AtomicContext, OperatorContext
from aam.core.txn import Cell
from aam.logging import get_logger
from aam.models import RunConfig
from aam.utils.config import Settings

logger = get_logger(__name__)

DEFAULT_DAMPING = 0.85


@dataclass
class PageRankResult(AlgorithmResult):
    ranks: List[float] = field(default_factory=list)
    iterations: int = 0


def pagerank(
    graph: Graph,
    d: float = DEFAULT_DAMPING,
    iterations: int = 10,
    config: Optional[RunConfig] = None,
    settings: Optional[Settings] = None,
    initial: Optional[Sequence[float]] = None,
) -> PageRankResult:
    """
    Run PageRank for a fixed number of iterations.

    Args:
        graph: Input graph (out-edges are followed)
        d: Damping factor in (0, 1)
        iterations: Number of synchronous iterations
        initial: Starting ranks (uniform 1/n when omitted)

    Raises:
        ContractError: d outside (0, 1) or initial of the wrong length
    """
    if not 0.0 < d < 1.0:
        raise ContractError(f"damping factor must be in (0, 1), got {d}")
    n = graph.n
    if initial is not None and len(initial) != n:
        raise ContractError(f"initial ranks must have {n} entries")

    runtime = build_runtime(graph, config, settings)
    partition = runtime.partition
    out_deg = graph.degrees()
    teleport = (1.0 - d) / n if n else 0.0

    rank = [Cell(float(initial[v]) if initial is not None else 1.0 / n) for v in range(n)]
    old_rank: List[float] = [0.0] * n

    def add(ctx: OperatorContext, v: int, params: Tuple) -> None:
        ctx.write(rank[v], ctx.read(rank[v]) + params[0])

    def add_atomically(actx: AtomicContext, v: int, params: Tuple) -> None:
        actx.acc(rank[v], params[0], "sum")

    add_op = runtime.register_operator("pr-add", add, FF_AS, atomic_form=add_atomically)

    def scatter(ctx: OperatorContext, v: int, params: Tuple) -> None:
        ctx.write(rank[v], ctx.read(rank[v]) + teleport)
        if not out_deg[v]:
            return
        contribution = d * old_rank[v] / out_deg[v]
        for w in graph.neighbors(v):
            w = int(w)
            if partition.owner(w) == ctx.pid:
                ctx.write(rank[w], ctx.read(rank[w]) + contribution)
            else:
                ctx.spawn(add_op, w, (contribution,))

    def scatter_atomically(actx: AtomicContext, v: int, params: Tuple) -> None:
        actx.acc(rank[v], teleport, "sum")
        if not out_deg[v]:
            return
        contribution = d * old_rank[v] / out_deg[v]
        for w in graph.neighbors(v):
            w = int(w)
            if partition.owner(w) == actx.pid:
                actx.acc(rank[w], contribution, "sum")
            else:
                actx.spawn(add_op, w, (contribution,))

    scatter_op = runtime.register_operator("pr-scatter", scatter, FF_AS, atomic_form=scatter_atomically)

    for iteration in range(iterations):
        old_rank[:] = [c.load() for c in rank]
        for c in rank:
            c.store(0.0)
        for v in range(n):
            runtime.seed(scatter_op, v)
        runtime.run_to_quiescence()
        logger.info("pagerank iteration %d done", iteration + 1)

    return PageRankResult(stats=runtime.stats, ranks=[c.load() for c in rank], iterations=iterations)
