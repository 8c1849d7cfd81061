"""
Utility helper functions for AAM.

This module provides small helpers used across the package:
the build identifier stamped on benchmark rows, parsing of the graph and
policy spec strings accepted by the CLI, and CSV output.
"""

import csv
import functools
import subprocess
import sys
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, TextIO, Tuple, Union

import aam
from aam.core.errors import ConfigError, MalformedInputError
from aam.core.graph import (
    EdgeList,
    Graph,
    build_csr,
    generate_erdos_renyi,
    generate_kronecker,
    load_snap_edge_list,
)


@functools.lru_cache(maxsize=1)
def build_id() -> str:
    """
    Identify the code that produced a result.

    Returns:
        `git describe --always --dirty` of the source checkout, or the
        package version when git or the checkout is unavailable
    """
    repo = Path(aam.__file__).resolve().parent.parent
    try:
        result = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            cwd=repo,
            capture_output=True,
            text=True,
            check=False,
            timeout=5,
        )
        if result.returncode == 0 and result.stdout.strip():
            return result.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    return f"v{aam.__version__}"


def parse_graph_spec(spec: str, seed: int = 0) -> Tuple[EdgeList, str]:
    """
    Turn a CLI graph spec into an edge list.

    Accepted forms: `kron:<scale>,<edge_factor>`, `er:<n>,<p>`, `file:<path>`.

    Args:
        spec: The spec string
        seed: Generator seed

    Returns:
        (edge list, normalized spec)

    Raises:
        ConfigError: Unknown kind or malformed arguments
    """
    kind, sep, args = spec.partition(":")
    kind = kind.strip().lower()
    if not sep or not args:
        raise ConfigError(f"graph spec '{spec}' must look like kind:args")

    try:
        if kind == "kron":
            scale, edge_factor = (int(x) for x in args.split(","))
            return generate_kronecker(scale, edge_factor, seed), f"kron:{scale},{edge_factor}"
        if kind == "er":
            n_str, p_str = args.split(",")
            n, p = int(n_str), float(p_str)
            return generate_erdos_renyi(n, p, seed), f"er:{n},{p}"
    except (ValueError, MalformedInputError) as e:
        raise ConfigError(f"bad graph spec '{spec}': {e}") from None

    if kind == "file":
        return load_snap_edge_list(args), f"file:{args}"
    raise ConfigError(f"unknown graph kind '{kind}' (expected kron, er or file)")


def load_graph(spec: str, seed: int = 0, directed: bool = False) -> Graph:
    """Parse a graph spec and build its CSR."""
    edges, _ = parse_graph_spec(spec, seed)
    return build_csr(edges, directed=directed)


def parse_int_range(text: str) -> List[int]:
    """
    Parse "a:b:step" (inclusive of a, exclusive of b) or "x,y,z" into ints.

    Raises:
        ConfigError: Malformed range or empty result
    """
    try:
        if ":" in text:
            parts = [int(x) for x in text.split(":")]
            if len(parts) == 2:
                parts.append(1)
            start, stop, step = parts
            values = list(range(start, stop, step))
        else:
            values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"bad integer range '{text}'") from None
    if not values:
        raise ConfigError(f"range '{text}' is empty")
    return values


def write_csv(rows: Sequence[Dict[str, Any]], out: Optional[Union[str, Path]] = None) -> None:
    """
    Write rows as CSV to out, or to stdout when out is None.

    Columns are the union of all row keys in first-seen order.
    """
    columns: List[str] = []
    for row in rows:
        for key in row:
            if key not in columns:
                columns.append(key)

    if out is None:
        _write_rows(sys.stdout, columns, rows)
        return
    with open(out, "w", newline="") as f:
        _write_rows(f, columns, rows)


def _write_rows(stream: TextIO, columns: List[str], rows: Iterable[Dict[str, Any]]) -> None:
    writer = csv.DictWriter(stream, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
