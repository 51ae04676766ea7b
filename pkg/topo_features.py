"""
Topological Features
Métricas topológicas por nodo y por grafo, y aumento de la matriz de features.

Columnas agregadas por augment_features, en este orden fijo:
    [features originales | degree_centrality | local_clustering]
"""
import logging
from dataclasses import dataclass
from typing import Any, Dict, List

import numpy as np

from errors import TooLarge
from propagation_graph import GraphDataset, PropagationGraph


logger = logging.getLogger(__name__)

ORACLE_MAX_NODES = 200
TOPO_COLUMNS = ('degree_centrality', 'local_clustering')


@dataclass(frozen=True)
class TopoSummary:
    """
    Las cinco estadísticas de grafo usadas en el análisis topológico.
    """
    graph_id: str
    label: int
    avg_degree: float
    mean_degree_centrality: float
    mean_clustering: float
    density: float
    node_count: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            'graph_id': self.graph_id,
            'label': self.label,
            'avg_degree': self.avg_degree,
            'mean_degree_centrality': self.mean_degree_centrality,
            'mean_clustering': self.mean_clustering,
            'density': self.density,
            'node_count': self.node_count,
        }


def degree_centrality(g: PropagationGraph) -> np.ndarray:
    """
    Grado normalizado por (n - 1); 0 para un grafo de un solo nodo.

    Args:
        g: Grafo válido

    Returns:
        Vector de largo num_nodes con valores en [0, 1]
    """
    if g.num_nodes < 2:
        return np.zeros(g.num_nodes, dtype=np.float64)
    return g.degrees.astype(np.float64) / (g.num_nodes - 1)


def _clustering_from_triangles(triangles: np.ndarray, degrees: np.ndarray) -> np.ndarray:
    result = np.zeros(triangles.shape[0], dtype=np.float64)
    for v, (t, d) in enumerate(zip(triangles.tolist(), degrees.tolist())):
        if d >= 2:
            result[v] = 2.0 * t / (d * (d - 1))
    return result


def local_clustering(g: PropagationGraph) -> np.ndarray:
    """
    Coeficiente de clustering local: 2·T(v) / (deg(v)·(deg(v) - 1)), 0 si deg(v) < 2.

    T(v) se cuenta intersectando la adyacencia de v con la de cada vecino.

    Args:
        g: Grafo válido

    Returns:
        Vector de largo num_nodes con valores en [0, 1]
    """
    neighbor_sets = [set(adj) for adj in g.adjacency]
    triangles = np.zeros(g.num_nodes, dtype=np.int64)

    for v, adj in enumerate(g.adjacency):
        if len(adj) < 2:
            continue
        # cada arista entre vecinos se ve desde sus dos extremos
        shared = sum(len(neighbor_sets[u] & neighbor_sets[v]) for u in adj)
        triangles[v] = shared // 2

    return _clustering_from_triangles(triangles, g.degrees)


def clustering_oracle(g: PropagationGraph) -> np.ndarray:
    """
    Clustering local por enumeración exhaustiva de triplas (v, u, w).

    Solo para verificación: costo cúbico.

    Raises:
        TooLarge: Si el grafo tiene más de 200 nodos
    """
    n = g.num_nodes
    if n > ORACLE_MAX_NODES:
        raise TooLarge(f'Grafo {g.id}: {n} nodos excede el máximo del oráculo ({ORACLE_MAX_NODES})')

    adjacency = np.zeros((n, n), dtype=bool)
    if g.num_edges:
        adjacency[g.edges[:, 0], g.edges[:, 1]] = True
        adjacency[g.edges[:, 1], g.edges[:, 0]] = True

    upper = np.triu(np.ones((n, n), dtype=bool), k=1)
    triangles = np.zeros(n, dtype=np.int64)
    for v in range(n):
        # todas las parejas u < w: ambas adyacentes a v y adyacentes entre sí
        closed = adjacency[v][:, None] & adjacency[v][None, :] & adjacency & upper
        triangles[v] = int(closed.sum())

    return _clustering_from_triangles(triangles, adjacency.sum(axis=1))


def graph_density(g: PropagationGraph) -> float:
    """Densidad 2m / (n(n - 1)); 0 si n < 2."""
    n = g.num_nodes
    if n < 2:
        return 0.0
    return 2.0 * g.num_edges / (n * (n - 1))


def average_degree(g: PropagationGraph) -> float:
    """Grado promedio 2m / n."""
    if g.num_nodes < 1:
        return 0.0
    return 2.0 * g.num_edges / g.num_nodes


def augment_features(g: PropagationGraph) -> PropagationGraph:
    """
    Concatena degree centrality y clustering local a las features de cada nodo.

    Las columnas originales se conservan bit a bit.

    Returns:
        Grafo con feat_dim + 2 columnas
    """
    extra = np.column_stack([degree_centrality(g), local_clustering(g)])
    return g.with_features(np.hstack([g.features, extra]))


def augment_dataset(ds: GraphDataset) -> GraphDataset:
    """Aplica augment_features a todos los grafos del dataset."""
    graphs = [augment_features(g) for g in ds.graphs]
    logger.info(f'Dataset {ds.name} aumentado: feat_dim {ds.feat_dim} -> {ds.feat_dim + 2}')
    return ds.with_graphs(graphs, augmented=True)


def summarize(g: PropagationGraph) -> TopoSummary:
    """
    Calcula las cinco estadísticas topológicas de un grafo.

    Las medias de centralidad y clustering son promedios simples sobre nodos.
    """
    return TopoSummary(
        graph_id=g.id,
        label=g.label,
        avg_degree=average_degree(g),
        mean_degree_centrality=float(np.mean(degree_centrality(g))),
        mean_clustering=float(np.mean(local_clustering(g))),
        density=graph_density(g),
        node_count=g.num_nodes,
    )


def summarize_dataset(ds: GraphDataset) -> List[TopoSummary]:
    """Resume todos los grafos del dataset, en el orden del dataset."""
    return [summarize(g) for g in ds.graphs]


def strip_topology(ds: GraphDataset) -> GraphDataset:
    """Quita las dos columnas topológicas de un dataset aumentado; si no lo está lo retorna igual."""
    if not ds.augmented:
        return ds
    graphs = [g.with_features(g.features[:, :-len(TOPO_COLUMNS)]) for g in ds.graphs]
    return ds.with_graphs(graphs, augmented=False)
