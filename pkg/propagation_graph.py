"""
Propagation Graph
Modelo de datos de cascadas de propagación de noticias: grafos, datasets, batching y splits.
"""
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from errors import (
    BadFractions,
    ClassMissing,
    DuplicateEdge,
    EmptyBatch,
    FeatureDimMismatch,
    IndexOutOfRange,
    RaggedFeatureMatrix,
    SelfLoop,
)


logger = logging.getLogger(__name__)

SPLITS = ('train', 'val', 'test')
LABEL_NAMES = {0: 'real', 1: 'fake'}


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class PropagationGraph:
    """
    Cascada de una noticia: nodos = usuarios que la compartieron, aristas = retweets.

    Attributes:
        id: Identificador de la noticia
        num_nodes: Cantidad de nodos
        edges: Array (m, 2) de pares no dirigidos
        features: Matriz (num_nodes, feat_dim) de features de nodo
        root: Índice del nodo raíz (la noticia)
        label: 0 = real, 1 = fake
    """
    id: str
    num_nodes: int
    edges: np.ndarray
    features: np.ndarray
    root: int
    label: int

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2).copy()
        features = np.asarray(self.features, dtype=np.float64)
        if features.ndim == 1:
            features = features.reshape(self.num_nodes, -1) if self.num_nodes else features.reshape(0, 0)
        object.__setattr__(self, 'edges', _frozen(edges))
        object.__setattr__(self, 'features', _frozen(features.copy()))
        object.__setattr__(self, 'num_nodes', int(self.num_nodes))
        object.__setattr__(self, 'root', int(self.root))
        object.__setattr__(self, 'label', int(self.label))

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    @property
    def feat_dim(self) -> int:
        return int(self.features.shape[1]) if self.features.ndim == 2 else 0

    @cached_property
    def adjacency(self) -> List[List[int]]:
        """Listas de adyacencia ordenadas y sin duplicados."""
        neighbor_sets: List[set] = [set() for _ in range(self.num_nodes)]
        for u, w in self.edges.tolist():
            neighbor_sets[u].add(w)
            neighbor_sets[w].add(u)
        return [sorted(s) for s in neighbor_sets]

    @cached_property
    def degrees(self) -> np.ndarray:
        degrees = np.zeros(self.num_nodes, dtype=np.int64)
        np.add.at(degrees, self.edges[:, 0], 1)
        np.add.at(degrees, self.edges[:, 1], 1)
        return _frozen(degrees)

    def with_features(self, features: np.ndarray) -> 'PropagationGraph':
        """Retorna una copia con otra matriz de features."""
        return PropagationGraph(self.id, self.num_nodes, self.edges, features, self.root, self.label)

    def with_edges(self, edges: np.ndarray) -> 'PropagationGraph':
        """Retorna una copia con otro conjunto de aristas."""
        return PropagationGraph(self.id, self.num_nodes, edges, self.features, self.root, self.label)

    def equals(self, other: 'PropagationGraph') -> bool:
        """Comparación campo a campo (bit a bit para los arrays)."""
        return (
            self.id == other.id
            and self.num_nodes == other.num_nodes
            and self.root == other.root
            and self.label == other.label
            and self.edges.shape == other.edges.shape
            and np.array_equal(self.edges, other.edges)
            and self.features.shape == other.features.shape
            and np.array_equal(self.features, other.features)
        )

    def __repr__(self) -> str:
        return (
            f"PropagationGraph({self.id}, n={self.num_nodes}, m={self.num_edges}, "
            f"feat_dim={self.feat_dim}, label={LABEL_NAMES.get(self.label, self.label)})"
        )


def graph_from_lists(
    graph_id: str,
    num_nodes: int,
    edges: Iterable[Sequence[int]],
    features: Sequence[Sequence[float]],
    root: int = 0,
    label: int = 0,
) -> PropagationGraph:
    """
    Construye un grafo a partir de listas planas.

    Raises:
        RaggedFeatureMatrix: Si alguna fila de features tiene otra cantidad de columnas
    """
    rows = list(features)
    if len(rows) != num_nodes:
        raise RaggedFeatureMatrix(
            f'Grafo {graph_id}: la matriz de features tiene {len(rows)} filas, se esperaban {num_nodes}'
        )
    width = len(rows[0]) if rows else 0
    for index, row in enumerate(rows):
        if len(row) != width:
            raise RaggedFeatureMatrix(
                f'Grafo {graph_id}: la fila {index} tiene {len(row)} columnas, se esperaban {width}'
            )
    matrix = np.array(rows, dtype=np.float64).reshape(num_nodes, width)
    return PropagationGraph(graph_id, num_nodes, list(edges), matrix, root, label)


def undirected_edges(pairs: Iterable[Sequence[int]]) -> np.ndarray:
    """
    Canoniza aristas de una fuente dirigida: orienta (min, max) y fusiona duplicados inversos.

    Los self-loops se conservan para que validate_graph los reporte.

    Args:
        pairs: Pares (origen, destino)

    Returns:
        Array (m, 2) ordenado lexicográficamente
    """
    seen = set()
    canonical = []
    for u, w in pairs:
        key = (min(int(u), int(w)), max(int(u), int(w)))
        if key not in seen:
            seen.add(key)
            canonical.append(key)
    canonical.sort()
    return np.array(canonical, dtype=np.int64).reshape(-1, 2)


def validate_graph(g: PropagationGraph) -> PropagationGraph:
    """
    Verifica todos los invariantes de PropagationGraph.

    Args:
        g: Grafo a validar

    Returns:
        El mismo grafo si es válido

    Raises:
        IndexOutOfRange, SelfLoop, DuplicateEdge, RaggedFeatureMatrix
    """
    n = g.num_nodes
    if n < 1:
        raise IndexOutOfRange(f'Grafo {g.id}: num_nodes debe ser positivo (recibido {n})')
    if not 0 <= g.root < n:
        raise IndexOutOfRange(f'Grafo {g.id}: root {g.root} fuera de rango [0, {n})')

    seen = set()
    for u, w in g.edges.tolist():
        if not (0 <= u < n and 0 <= w < n):
            raise IndexOutOfRange(f'Grafo {g.id}: arista ({u}, {w}) fuera de rango [0, {n})')
        if u == w:
            raise SelfLoop(f'Grafo {g.id}: self-loop en la arista ({u}, {w})')
        key = (u, w) if u < w else (w, u)
        if key in seen:
            raise DuplicateEdge(f'Grafo {g.id}: arista duplicada ({u}, {w})')
        seen.add(key)

    if g.features.ndim != 2 or g.features.shape[0] != n:
        raise RaggedFeatureMatrix(
            f'Grafo {g.id}: la matriz de features tiene forma {g.features.shape}, se esperaban {n} filas'
        )
    return g


def neighbors(g: PropagationGraph, v: int) -> List[int]:
    """
    Retorna la adyacencia ordenada y sin duplicados de v.

    Raises:
        IndexOutOfRange: Si v no es un nodo del grafo
    """
    if not 0 <= v < g.num_nodes:
        raise IndexOutOfRange(f'Grafo {g.id}: nodo {v} fuera de rango [0, {g.num_nodes})')
    return list(g.adjacency[v])


@dataclass(frozen=True, eq=False)
class BatchedGraph:
    """
    Concatenación diagonal por bloques de varios grafos.

    Attributes:
        total_nodes: Suma de nodos
        edges: Aristas desplazadas por el offset de cada grafo
        features: Features apiladas por filas
        membership: Índice de grafo de cada nodo (no decreciente)
        labels: Etiqueta por grafo
        roots: Raíces desplazadas
        ids: Identificadores de los grafos en orden
    """
    total_nodes: int
    edges: np.ndarray
    features: np.ndarray
    membership: np.ndarray
    labels: np.ndarray
    roots: np.ndarray
    ids: Tuple[str, ...] = ()

    @property
    def num_graphs(self) -> int:
        return int(self.labels.shape[0])

    @cached_property
    def offsets(self) -> np.ndarray:
        counts = np.bincount(self.membership, minlength=self.num_graphs)
        return np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)


def batch_graphs(gs: Sequence[PropagationGraph]) -> BatchedGraph:
    """
    Concatena grafos en un BatchedGraph desplazando índices de nodos.

    Raises:
        EmptyBatch: Si la lista está vacía
        FeatureDimMismatch: Si los grafos no comparten feat_dim
    """
    if not gs:
        raise EmptyBatch('No se puede armar un batch vacío')

    feat_dim = gs[0].feat_dim
    for g in gs:
        if g.feat_dim != feat_dim:
            raise FeatureDimMismatch(
                f'Grafo {g.id}: feat_dim {g.feat_dim} distinto de {feat_dim}'
            )

    offsets = np.cumsum([0] + [g.num_nodes for g in gs])
    edges = np.concatenate([g.edges + offset for g, offset in zip(gs, offsets)], axis=0)
    features = np.concatenate([g.features for g in gs], axis=0)
    membership = np.repeat(np.arange(len(gs), dtype=np.int64), [g.num_nodes for g in gs])

    return BatchedGraph(
        total_nodes=int(offsets[-1]),
        edges=edges.reshape(-1, 2).astype(np.int64),
        features=features,
        membership=membership,
        labels=np.array([g.label for g in gs], dtype=np.int64),
        roots=np.array([g.root + offset for g, offset in zip(gs, offsets)], dtype=np.int64),
        ids=tuple(g.id for g in gs),
    )


def unbatch(batch: BatchedGraph) -> List[PropagationGraph]:
    """Inversa de batch_graphs: recupera los grafos originales."""
    graphs = []
    offsets = batch.offsets
    edge_owner = batch.membership[batch.edges[:, 0]] if batch.edges.size else np.zeros(0, dtype=np.int64)

    for k in range(batch.num_graphs):
        start, stop = int(offsets[k]), int(offsets[k + 1])
        graphs.append(
            PropagationGraph(
                id=batch.ids[k] if batch.ids else str(k),
                num_nodes=stop - start,
                edges=batch.edges[edge_owner == k] - start,
                features=batch.features[start:stop],
                root=int(batch.roots[k]) - start,
                label=int(batch.labels[k]),
            )
        )
    return graphs


@dataclass(frozen=True, eq=False)
class GraphDataset:
    """
    Colección de grafos con feat_dim uniforme y asignación a splits.

    Attributes:
        graphs: Grafos del dataset
        splits: Mapa id de grafo -> 'train' | 'val' | 'test'
        augmented: True si las dos últimas columnas son features topológicas
        name: Identificador del dataset
    """
    graphs: Tuple[PropagationGraph, ...]
    splits: Dict[str, str] = field(default_factory=dict)
    augmented: bool = False
    name: str = 'dataset'

    def __post_init__(self):
        object.__setattr__(self, 'graphs', tuple(self.graphs))
        object.__setattr__(self, 'splits', dict(self.splits))

    @property
    def feat_dim(self) -> int:
        return self.graphs[0].feat_dim if self.graphs else 0

    @property
    def labels(self) -> np.ndarray:
        return np.array([g.label for g in self.graphs], dtype=np.int64)

    def __len__(self) -> int:
        return len(self.graphs)

    def subset(self, split: str) -> List[PropagationGraph]:
        """Retorna los grafos asignados a un split, en orden del dataset."""
        return [g for g in self.graphs if self.splits.get(g.id) == split]

    def with_graphs(self, graphs: Sequence[PropagationGraph], augmented: Optional[bool] = None) -> 'GraphDataset':
        """Retorna un dataset con otros grafos y los mismos splits."""
        return GraphDataset(
            graphs=tuple(graphs),
            splits=self.splits,
            augmented=self.augmented if augmented is None else augmented,
            name=self.name,
        )

    def with_splits(self, splits: Dict[str, str]) -> 'GraphDataset':
        return GraphDataset(self.graphs, splits, self.augmented, self.name)

    def split_sizes(self) -> Dict[str, int]:
        return {split: len(self.subset(split)) for split in SPLITS}


def _floor(x: float) -> int:
    return int(np.floor(x + 1e-9))


def _stratified_quotas(class_sizes: Sequence[int], fraction: float, total: int) -> List[int]:
    """Reparte floor(total * fraction) entre clases por el método del mayor resto."""
    target = _floor(total * fraction)
    exact = [size * fraction for size in class_sizes]
    quotas = [_floor(x) for x in exact]
    by_remainder = sorted(range(len(class_sizes)), key=lambda c: (-(exact[c] - quotas[c]), c))
    for c in by_remainder[:max(0, target - sum(quotas))]:
        quotas[c] += 1
    return quotas


def split_dataset(
    ds: GraphDataset,
    fractions: Tuple[float, float, float] = (0.7, 0.1, 0.2),
    seed: int = 42,
) -> GraphDataset:
    """
    Divide el dataset en train/val/test estratificando por etiqueta.

    Los tamaños de val y test son el piso de n * fracción; el resto va a train.
    Cada split se reparte entre clases proporcionalmente (±1 grafo por clase).

    Args:
        ds: Dataset a dividir
        fractions: Fracciones (train, val, test)
        seed: Semilla de la permutación

    Returns:
        Dataset con splits asignados

    Raises:
        BadFractions: Si alguna fracción no es positiva o no suman 1
        ClassMissing: Si alguna clase no aparece en el dataset
    """
    if len(fractions) != 3 or any(f <= 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise BadFractions(f'Fracciones inválidas {tuple(fractions)}: deben ser positivas y sumar 1')

    ids_by_class = []
    for label in (0, 1):
        ids = [g.id for g in ds.graphs if g.label == label]
        if not ids:
            raise ClassMissing(f'La clase {LABEL_NAMES[label]} no aparece en el dataset {ds.name}')
        ids_by_class.append(ids)

    class_sizes = [len(ids) for ids in ids_by_class]
    val_quotas = _stratified_quotas(class_sizes, fractions[1], len(ds))
    test_quotas = _stratified_quotas(class_sizes, fractions[2], len(ds))

    # cada clase conserva al menos un grafo en train
    for c, size in enumerate(class_sizes):
        if val_quotas[c] + test_quotas[c] >= size:
            if val_quotas[c] >= test_quotas[c]:
                val_quotas[c] -= 1
            else:
                test_quotas[c] -= 1
            logger.warning(
                f'Split de {ds.name}: la clase {LABEL_NAMES[c]} quedaba sin grafos en train; '
                f'se devuelve uno a train'
            )

    rng = np.random.default_rng(seed)
    splits: Dict[str, str] = {}

    for ids, n_val, n_test in zip(ids_by_class, val_quotas, test_quotas):
        order = rng.permutation(len(ids))
        n_train = len(ids) - n_val - n_test

        for position, index in enumerate(order):
            if position < n_train:
                splits[ids[index]] = 'train'
            elif position < n_train + n_val:
                splits[ids[index]] = 'val'
            else:
                splits[ids[index]] = 'test'

    sizes = {s: sum(1 for v in splits.values() if v == s) for s in SPLITS}
    logger.info(f'Split de {ds.name} (seed={seed}): {sizes}')
    return ds.with_splits(splits)
