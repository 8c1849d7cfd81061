"""Graph algorithms expressed as atomic active message operators."""

from aam.algorithms.bfs import UNVISITED, BfsResult, bfs
from aam.algorithms.boruvka import MstResult, boruvka_mst
from aam.algorithms.coloring import ColoringResult, boman_coloring
from aam.algorithms.pagerank import PageRankResult, pagerank
from aam.algorithms.st_connectivity import StResult, Verdict, st_connectivity

__all__ = [
    "UNVISITED",
    "BfsResult",
    "bfs",
    "MstResult",
    "boruvka_mst",
    "ColoringResult",
    "boman_coloring",
    "PageRankResult",
    "pagerank",
    "StResult",
    "Verdict",
    "st_connectivity",
]
