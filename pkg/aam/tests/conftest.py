"""
Shared fixtures for the AAM test suite.
"""

import pytest

from aam.core.graph import EdgeList, build_csr, generate_erdos_renyi, generate_kronecker, synthesize_weights
from aam.core.stats import RunStats
from aam.utils.config import CostSettings, Settings


@pytest.fixture
def settings():
    """Default settings with a short watchdog so hangs fail fast."""
    return Settings(watchdog_seconds=20.0)


@pytest.fixture
def costly_network():
    """Settings whose network messages dominate the cost of an operator."""
    return Settings(
        watchdog_seconds=20.0,
        cost=CostSettings(message_ns=1000.0, element_ns=5.0, latency_ns=0.0),
    )


@pytest.fixture
def stats():
    return RunStats()


@pytest.fixture
def path_graph():
    """0 - 1 - 2 - 3 - 4, plus the isolated vertex 5."""
    edges = EdgeList.from_tuples(6, [(0, 1), (1, 2), (2, 3), (3, 4)])
    return build_csr(edges)


@pytest.fixture
def two_components():
    """Triangle {0, 1, 2} and edge {3, 4}."""
    edges = EdgeList.from_tuples(5, [(0, 1), (1, 2), (2, 0), (3, 4)])
    return build_csr(edges)


@pytest.fixture
def weighted_graph():
    """Small weighted graph with a unique MST of weight 1 + 2 + 3 + 5 = 11."""
    edges = EdgeList.from_tuples(5, [
        (0, 1, 1.0),
        (1, 2, 2.0),
        (0, 2, 4.0),
        (2, 3, 3.0),
        (1, 3, 6.0),
        (3, 4, 5.0),
        (0, 4, 7.0),
    ])
    return build_csr(edges)


@pytest.fixture
def complete4():
    edges = EdgeList.from_tuples(4, [(u, v) for u in range(4) for v in range(u + 1, 4)])
    return build_csr(edges)


@pytest.fixture
def kron_graph():
    """Kronecker scale 7 (128 vertices, 1024 generated edges)."""
    return build_csr(generate_kronecker(7, 8, seed=3))


@pytest.fixture
def er_graph():
    return build_csr(generate_erdos_renyi(96, 0.06, seed=5))


@pytest.fixture
def weighted_kron(kron_graph):
    return synthesize_weights(kron_graph, seed=11)
