"""
Graph module for AAM.

This module holds the immutable graph substrate every operator touches:
edge lists, the CSR topology built from them, synthetic generators, SNAP
edge-list ingestion and the one-dimensional ownership partition.

Key functionality:
- EdgeList / Graph / Partition: the data types
- build_csr: Edge list to CSR (mirroring, dedup, self-loop removal)
- validate_graph: Structural invariant check of a CSR graph
- generate_kronecker: Graph500-style stochastic Kronecker edge list
- generate_erdos_renyi: G(n, p) edge list
- load_snap_edge_list / write_snap_edge_list: Text edge-list I/O
- synthesize_weights: Distinct positive weights for unweighted graphs
- partition_1d / Partition.owner: Contiguous block ownership
"""

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from aam.core.errors import ContractError, GraphParseError, MalformedInputError
from aam.logging import get_logger

logger = get_logger(__name__)

# "# n=<count>" header written by write_snap_edge_list
_N_HEADER = re.compile(r"^#.*\bn=(\d+)\b")

# Graph500 initiator probabilities; D = 1 - (A + B + C) = 0.05
KRONECKER_A = 0.57
KRONECKER_B = 0.19
KRONECKER_C = 0.19


@dataclass(frozen=True, eq=False)
class EdgeList:
    """
    A vertex count plus parallel (src, dst[, weight]) arrays.

    id_map is set only when sparse input ids were compacted; id_map[i] is the
    original id of dense vertex i.
    """

    n: int
    src: np.ndarray
    dst: np.ndarray
    weights: Optional[np.ndarray] = None
    id_map: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.n < 0:
            raise MalformedInputError(f"vertex count must be non-negative, got {self.n}")
        if len(self.src) != len(self.dst):
            raise MalformedInputError("src and dst arrays differ in length")
        if self.weights is not None and len(self.weights) != len(self.src):
            raise MalformedInputError("weights must be given for all edges or for none")

    def __len__(self) -> int:
        return len(self.src)

    def __iter__(self) -> Iterator[Tuple[int, int, Optional[float]]]:
        for i in range(len(self.src)):
            w = None if self.weights is None else float(self.weights[i])
            yield int(self.src[i]), int(self.dst[i]), w

    @classmethod
    def from_tuples(cls, n: int, edges: Sequence[Tuple]) -> "EdgeList":
        """Build an edge list from (src, dst) or (src, dst, weight) tuples."""
        src = np.array([e[0] for e in edges], dtype=np.int64)
        dst = np.array([e[1] for e in edges], dtype=np.int64)
        weights = None
        if edges and len(edges[0]) > 2:
            weights = np.array([e[2] for e in edges], dtype=np.float64)
        return cls(n=n, src=src, dst=dst, weights=weights)

    def equals(self, other: "EdgeList") -> bool:
        """Element-wise equality (dataclass eq is ambiguous on arrays)."""
        if self.n != other.n or len(self) != len(other):
            return False
        if (self.weights is None) != (other.weights is None):
            return False
        same = np.array_equal(self.src, other.src) and np.array_equal(self.dst, other.dst)
        if same and self.weights is not None:
            same = np.array_equal(self.weights, other.weights)
        return bool(same)


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable CSR topology with optional parallel edge weights."""

    n: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    weights: Optional[np.ndarray] = None
    directed: bool = False
    id_map: Optional[np.ndarray] = None

    @property
    def num_edges(self) -> int:
        """Number of stored (directed) adjacency entries."""
        return int(self.row_offsets[-1])

    def degree(self, v: int) -> int:
        return int(self.row_offsets[v + 1] - self.row_offsets[v])

    def degrees(self) -> np.ndarray:
        return np.diff(self.row_offsets)

    def neighbors(self, v: int) -> np.ndarray:
        return self.col_indices[self.row_offsets[v]:self.row_offsets[v + 1]]

    def edge_weights(self, v: int) -> np.ndarray:
        if self.weights is None:
            raise ContractError("graph carries no edge weights")
        return self.weights[self.row_offsets[v]:self.row_offsets[v + 1]]

    def max_degree(self) -> int:
        return int(self.degrees().max()) if self.n else 0


@dataclass(frozen=True)
class Partition:
    """
    Contiguous 1-D block partition of n vertices over N processes.

    boundaries has N+1 entries; process p owns [boundaries[p], boundaries[p+1]).
    """

    n: int
    N: int
    boundaries: Tuple[int, ...] = field(repr=False)

    def owner(self, v: int) -> int:
        """Owning process of vertex v, in constant time."""
        if not 0 <= v < self.n:
            raise ContractError(f"vertex {v} outside [0, {self.n})")
        q, r = divmod(self.n, self.N)
        big = r * (q + 1)
        if v < big:
            return v // (q + 1)
        return r + (v - big) // q

    def local_vertices(self, pid: int) -> range:
        """Vertices owned by process pid."""
        if not 0 <= pid < self.N:
            raise ContractError(f"process {pid} outside [0, {self.N})")
        return range(self.boundaries[pid], self.boundaries[pid + 1])

    def sizes(self) -> List[int]:
        return [self.boundaries[p + 1] - self.boundaries[p] for p in range(self.N)]


def build_csr(edges: EdgeList, directed: bool = False) -> Graph:
    """
    Build a CSR graph from an edge list.

    Self-loops are dropped, duplicate edges collapse to one (keeping the
    smallest weight), and undirected inputs are mirrored.

    Args:
        edges: Input edge list
        directed: Keep edge direction when True

    Returns:
        A Graph satisfying validate_graph

    Raises:
        MalformedInputError: A vertex id is outside [0, n)
    """
    n = edges.n
    src = np.asarray(edges.src, dtype=np.int64)
    dst = np.asarray(edges.dst, dtype=np.int64)
    weights = None if edges.weights is None else np.asarray(edges.weights, dtype=np.float64)

    if len(src):
        lo = min(src.min(), dst.min())
        hi = max(src.max(), dst.max())
        if lo < 0 or hi >= n:
            raise MalformedInputError(f"vertex id out of range [0, {n}): saw {lo}..{hi}")

    keep = src != dst
    src, dst = src[keep], dst[keep]
    if weights is not None:
        weights = weights[keep]

    if not directed:
        src, dst = np.concatenate([src, dst]), np.concatenate([dst, src])
        if weights is not None:
            weights = np.concatenate([weights, weights])

    if weights is not None:
        order = np.lexsort((weights, dst, src))
    else:
        order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    if weights is not None:
        weights = weights[order]

    # First occurrence of each (src, dst) pair; sorted by weight it is the lightest
    if len(src):
        first = np.ones(len(src), dtype=bool)
        first[1:] = (src[1:] != src[:-1]) | (dst[1:] != dst[:-1])
        src, dst = src[first], dst[first]
        if weights is not None:
            weights = weights[first]

    counts = np.bincount(src, minlength=n) if n else np.zeros(0, dtype=np.int64)
    row_offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=row_offsets[1:])

    graph = Graph(
        n=n,
        row_offsets=row_offsets,
        col_indices=dst.astype(np.int64),
        weights=weights,
        directed=directed,
        id_map=edges.id_map,
    )
    logger.debug("built CSR: n=%d stored_edges=%d directed=%s", n, graph.num_edges, directed)
    return graph


def validate_graph(graph: Graph) -> None:
    """
    Check the CSR invariants.

    Raises:
        MalformedInputError: Any invariant is violated
    """
    ro = graph.row_offsets
    if len(ro) != graph.n + 1:
        raise MalformedInputError("row_offsets must have n+1 entries")
    if ro[0] != 0 or ro[-1] != len(graph.col_indices):
        raise MalformedInputError("row_offsets must start at 0 and end at |col_indices|")
    if np.any(np.diff(ro) < 0):
        raise MalformedInputError("row_offsets must be non-decreasing")
    if len(graph.col_indices) and (graph.col_indices.min() < 0 or graph.col_indices.max() >= graph.n):
        raise MalformedInputError("column index out of range")
    if graph.weights is not None and len(graph.weights) != len(graph.col_indices):
        raise MalformedInputError("weights must parallel col_indices")
    if not graph.directed:
        src = np.repeat(np.arange(graph.n, dtype=np.int64), np.diff(ro))
        forward = set(zip(src.tolist(), graph.col_indices.tolist()))
        for u, v in forward:
            if (v, u) not in forward:
                raise MalformedInputError(f"undirected graph misses mirror of ({u}, {v})")


def generate_kronecker(scale: int, edge_factor: int = 16, seed: int = 0) -> EdgeList:
    """
    Generate a Graph500 stochastic Kronecker edge list.

    Each of the edge_factor * 2^scale edges picks one quadrant per bit level
    with probabilities (A, B, C, D) = (0.57, 0.19, 0.19, 0.05); vertex labels
    and edge order are then permuted.

    Args:
        scale: log2 of the vertex count (>= 1)
        edge_factor: Edges per vertex
        seed: Generator seed; equal seeds give identical lists

    Returns:
        An unweighted EdgeList with n = 2^scale
    """
    if scale < 1:
        raise MalformedInputError(f"scale must be >= 1, got {scale}")

    rng = np.random.default_rng(seed)
    n = 2 ** scale
    m = int(edge_factor) * n

    ab = KRONECKER_A + KRONECKER_B
    c_norm = KRONECKER_C / (1.0 - ab)
    a_norm = KRONECKER_A / ab

    src = np.zeros(m, dtype=np.int64)
    dst = np.zeros(m, dtype=np.int64)
    for bit in range(scale):
        ii_bit = rng.random(m) > ab
        jj_bit = rng.random(m) > (c_norm * ii_bit + a_norm * (~ii_bit))
        src += ii_bit.astype(np.int64) << bit
        dst += jj_bit.astype(np.int64) << bit

    relabel = rng.permutation(n)
    src, dst = relabel[src], relabel[dst]
    order = rng.permutation(m)

    logger.debug("kronecker scale=%d edge_factor=%d seed=%d -> %d edges", scale, edge_factor, seed, m)
    return EdgeList(n=n, src=src[order], dst=dst[order])


def generate_erdos_renyi(n: int, p: float, seed: int = 0) -> EdgeList:
    """
    Generate a G(n, p) edge list: every unordered pair {u, v}, u < v, is
    included independently with probability p.

    Args:
        n: Vertex count
        p: Inclusion probability in [0, 1]
        seed: Generator seed

    Returns:
        An unweighted EdgeList with src < dst on every edge
    """
    if not 0.0 <= p <= 1.0:
        raise MalformedInputError(f"probability must be in [0, 1], got {p}")

    rng = np.random.default_rng(seed)
    srcs: List[np.ndarray] = []
    dsts: List[np.ndarray] = []
    for u in range(n - 1):
        hits = np.nonzero(rng.random(n - u - 1) < p)[0]
        if len(hits):
            srcs.append(np.full(len(hits), u, dtype=np.int64))
            dsts.append(hits.astype(np.int64) + u + 1)

    if srcs:
        return EdgeList(n=n, src=np.concatenate(srcs), dst=np.concatenate(dsts))
    return EdgeList(n=n, src=np.zeros(0, dtype=np.int64), dst=np.zeros(0, dtype=np.int64))


def load_snap_edge_list(path: Union[str, Path], remap: bool = False) -> EdgeList:
    """
    Load a SNAP-style whitespace separated "src dst [weight]" file.

    Lines starting with '#' and blank lines are skipped, except that a
    "# n=<count>" comment declares the vertex count. By default vertex ids are
    taken as dense and n = max(declared count, max id + 1), so isolated
    trailing vertices survive a write/load round trip. With remap=True the ids
    are compacted to 0..k-1 in ascending order, the original ids kept in
    EdgeList.id_map and the declared count ignored.

    Raises:
        OSError: The file cannot be read
        GraphParseError: A token is not numeric or a line has the wrong arity
    """
    path = Path(path)
    src: List[int] = []
    dst: List[int] = []
    weights: List[float] = []
    declared_n = 0

    with open(path, "r") as f:
        for line_number, line in enumerate(f, 1):
            stripped = line.strip()
            if stripped.startswith("#"):
                header = _N_HEADER.match(stripped)
                if header:
                    declared_n = max(declared_n, int(header.group(1)))
                continue
            if not stripped:
                continue
            tokens = stripped.split()
            if len(tokens) not in (2, 3):
                raise GraphParseError(f"expected 2 or 3 fields, got {len(tokens)}", line_number)
            try:
                u, v = int(tokens[0]), int(tokens[1])
                w = float(tokens[2]) if len(tokens) == 3 else None
            except ValueError:
                raise GraphParseError(f"non-numeric token in {stripped!r}", line_number) from None
            if u < 0 or v < 0:
                raise GraphParseError("negative vertex id", line_number)
            if src and (w is not None) != bool(weights):
                raise GraphParseError("weights must be present on all lines or none", line_number)
            if w is not None and w < 0:
                raise GraphParseError("weights must be non-negative", line_number)
            src.append(u)
            dst.append(v)
            if w is not None:
                weights.append(w)

    src_arr = np.array(src, dtype=np.int64)
    dst_arr = np.array(dst, dtype=np.int64)
    weight_arr = np.array(weights, dtype=np.float64) if weights else None

    if remap:
        ids, inverse = np.unique(np.concatenate([src_arr, dst_arr]), return_inverse=True)
        k = len(src_arr)
        return EdgeList(
            n=len(ids), src=inverse[:k].astype(np.int64), dst=inverse[k:].astype(np.int64),
            weights=weight_arr, id_map=ids,
        )

    n = int(max(src_arr.max(), dst_arr.max())) + 1 if len(src_arr) else 0
    n = max(n, declared_n)
    logger.debug("loaded %s: n=%d edges=%d", path, n, len(src_arr))
    return EdgeList(n=n, src=src_arr, dst=dst_arr, weights=weight_arr)


def write_snap_edge_list(edges: EdgeList, path: Union[str, Path]) -> None:
    """Write an edge list in the format load_snap_edge_list reads."""
    with open(path, "w") as f:
        f.write(f"# n={edges.n} edges={len(edges)}\n")
        for u, v, w in edges:
            if w is None:
                f.write(f"{u} {v}\n")
            else:
                f.write(f"{u} {v} {w!r}\n")


def synthesize_weights(graph: Graph, seed: int = 0) -> Graph:
    """
    Attach distinct positive pseudo-random weights.

    Mirrored entries of an undirected graph share the weight of their
    undirected edge, so the MST is unique.
    """
    rng = np.random.default_rng(seed)
    src = np.repeat(np.arange(graph.n, dtype=np.int64), graph.degrees())
    dst = graph.col_indices
    if graph.directed:
        keys = src * graph.n + dst
    else:
        keys = np.minimum(src, dst) * graph.n + np.maximum(src, dst)

    unique_keys, inverse = np.unique(keys, return_inverse=True)
    # A shuffled ladder of distinct values in (0, 1]
    ladder = (rng.permutation(len(unique_keys)) + 1.0) / max(len(unique_keys), 1)
    return Graph(
        n=graph.n,
        row_offsets=graph.row_offsets,
        col_indices=graph.col_indices,
        weights=ladder[inverse].astype(np.float64),
        directed=graph.directed,
        id_map=graph.id_map,
    )


def partition_1d(n: int, N: int) -> Partition:
    """
    Split n vertices into N contiguous blocks whose sizes differ by at most one.

    The first n mod N blocks take the extra vertex. N > n is allowed; the
    trailing processes then own nothing.
    """
    if N < 1:
        raise ContractError(f"process count must be >= 1, got {N}")
    q, r = divmod(n, N)
    boundaries = [0]
    for p in range(N):
        boundaries.append(boundaries[-1] + q + (1 if p < r else 0))
    return Partition(n=n, N=N, boundaries=tuple(boundaries))
