import numpy as np
import pytest

from cadnet import build_graph


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def path_graph():
    """0 - 1 - 2, no self-loops."""
    return build_graph([(0, 1), (1, 2)], 3)


@pytest.fixture
def toy_graph():
    """6 nodes: two triangles bridged by the edge (2, 3)."""
    edges = [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)]
    return build_graph(edges, 6)


@pytest.fixture
def graph_with_isolated():
    """4 nodes where node 3 has no edges."""
    return build_graph([(0, 1), (1, 2)], 4)
