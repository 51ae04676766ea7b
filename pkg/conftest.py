"""Fixtures compartidos por los tests."""
import networkx as nx
import numpy as np
import pytest

from propagation_graph import PropagationGraph


def random_graph(seed: int, num_nodes: int, p: float, feat_dim: int = 3, label: int = 0, graph_id: str = '') -> PropagationGraph:
    """Grafo G(n, p) de networkx con features normales."""
    nxg = nx.gnp_random_graph(num_nodes, p, seed=seed)
    edges = np.array(sorted(nxg.edges()), dtype=np.int64).reshape(-1, 2)
    features = np.random.default_rng(seed).standard_normal((num_nodes, feat_dim))
    return PropagationGraph(graph_id or f'g{seed}', num_nodes, edges, features, 0, label)


def permuted(g: PropagationGraph, perm: np.ndarray) -> PropagationGraph:
    """Renumera nodos: el nodo nuevo i es el viejo perm[i]."""
    inverse = np.argsort(perm)
    return PropagationGraph(g.id, g.num_nodes, inverse[g.edges], g.features[perm], int(inverse[g.root]), g.label)


@pytest.fixture
def make_graph():
    return random_graph


@pytest.fixture
def triangle() -> PropagationGraph:
    return PropagationGraph('triangle', 3, [[0, 1], [1, 2], [0, 2]], np.zeros((3, 2)), 0, 1)


@pytest.fixture
def star() -> PropagationGraph:
    return PropagationGraph('star', 4, [[0, 1], [0, 2], [0, 3]], np.ones((4, 2)), 0, 0)
