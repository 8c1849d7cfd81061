"""
Sequential reference implementations used to check the AAM algorithms.

Nothing here touches the runtime: plain queues, loops and a union-find.
"""

import math
from collections import deque
from typing import List, Optional, Sequence, Tuple

from aam.core.graph import Graph


class UnionFind:
    """Union-find with path halving and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return True


def bfs_oracle(graph: Graph, source: int) -> List[float]:
    distance: List[float] = [math.inf] * graph.n
    distance[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for w in graph.neighbors(u):
            w = int(w)
            if distance[w] == math.inf:
                distance[w] = distance[u] + 1
                queue.append(w)
    return distance


def pagerank_oracle(
    graph: Graph,
    d: float,
    iterations: int,
    initial: Optional[Sequence[float]] = None,
) -> List[float]:
    """Push-style PageRank; vertices without out-edges contribute nothing."""
    n = graph.n
    rank = list(initial) if initial is not None else [1.0 / n] * n
    out_deg = graph.degrees()
    for _ in range(iterations):
        new = [(1.0 - d) / n] * n
        for v in range(n):
            if out_deg[v]:
                share = d * rank[v] / out_deg[v]
                for w in graph.neighbors(v):
                    new[int(w)] += share
        rank = new
    return rank


def kruskal_mst(graph: Graph) -> List[Tuple[int, int, float]]:
    """Minimum spanning forest edges (lo, hi, weight) of an undirected weighted graph."""
    edges = []
    for u in range(graph.n):
        for v, w in zip(graph.neighbors(u), graph.edge_weights(u)):
            if u < v:
                edges.append((float(w), u, int(v)))
    edges.sort()
    uf = UnionFind(graph.n)
    forest = [(u, v, w) for w, u, v in edges if uf.union(u, v)]
    return sorted(forest)


def st_oracle(graph: Graph, s: int, t: int) -> bool:
    uf = UnionFind(graph.n)
    for u in range(graph.n):
        for v in graph.neighbors(u):
            uf.union(u, int(v))
    return uf.find(s) == uf.find(t)


def monochromatic_edges(graph: Graph, colors: Sequence[int]) -> List[Tuple[int, int]]:
    """Edges (u < v) whose endpoints share a color."""
    bad = []
    for u in range(graph.n):
        for v in graph.neighbors(u):
            v = int(v)
            if u < v and colors[u] == colors[v]:
                bad.append((u, v))
    return bad


def is_proper_coloring(graph: Graph, colors: Sequence[int]) -> bool:
    return not monochromatic_edges(graph, colors) and all(c >= 0 for c in colors)
