"""Shared plumbing for the algorithm drivers."""

from dataclasses import dataclass, field
from typing import Optional

from aam.core.errors import ContractError
from aam.core.graph import Graph, partition_1d
from aam.core.runtime import AAMRuntime
from aam.core.stats import RunStats
from aam.models import RunConfig
from aam.utils.config import Settings


@dataclass
class AlgorithmResult:
    """Common part of every algorithm result."""

    stats: RunStats = field(default_factory=RunStats)


def build_runtime(
    graph: Graph,
    config: Optional[RunConfig] = None,
    settings: Optional[Settings] = None,
) -> AAMRuntime:
    """Partition graph over config.procs processes and build a runtime for it."""
    config = config or RunConfig()
    return AAMRuntime(partition_1d(graph.n, config.procs), config, settings)


def check_vertex(graph: Graph, v: int, what: str = "vertex") -> None:
    if not 0 <= v < graph.n:
        raise ContractError(f"{what} {v} outside [0, {graph.n})")
