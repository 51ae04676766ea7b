"""
Ablation
Análisis de importancia: accuracy original vs solo features (topología aleatoria)
vs solo estructura (features gaussianas).
"""
import logging
from dataclasses import dataclass, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np

from config import REWIRING_MODES, TrainConfig
from errors import TooDense, UsageError
from propagation_graph import GraphDataset, PropagationGraph, split_dataset, undirected_edges
from topo_features import strip_topology
from training import evaluate, train


logger = logging.getLogger(__name__)

SeedLike = Union[int, np.random.SeedSequence]

SETTINGS = ('original', 'feature_only', 'structure_only')
SWAPS_PER_EDGE = 10


def _degree_preserving(g: PropagationGraph, rng: np.random.Generator) -> np.ndarray:
    graph = nx.Graph()
    graph.add_nodes_from(range(g.num_nodes))
    graph.add_edges_from(g.edges.tolist())
    nswap = SWAPS_PER_EDGE * g.num_edges
    try:
        nx.double_edge_swap(graph, nswap=nswap, max_tries=100 * nswap, seed=int(rng.integers(2**31)))
    except (nx.NetworkXError, nx.NetworkXAlgorithmError) as e:
        # grafos chicos o estrellas: sin swaps posibles, se conserva lo logrado
        logger.debug(f'Grafo {g.id}: rewiring parcial ({e})')
    return undirected_edges(graph.edges())


def randomize_edges(g: PropagationGraph, seed: SeedLike = 0, mode: str = 'uniform') -> PropagationGraph:
    """
    Reemplaza la topología por aristas aleatorias con la misma cantidad de aristas.

    Modo 'uniform': pares no dirigidos sin self-loops elegidos uniformemente sin reemplazo.
    Modo 'degree_preserving': double edge swaps, conserva además la secuencia de grados.

    Features, etiqueta y raíz se conservan bit a bit.

    Raises:
        TooDense: Si hay más aristas que pares posibles
    """
    n, m = g.num_nodes, g.num_edges
    total = n * (n - 1) // 2
    if m > total:
        raise TooDense(f'Grafo {g.id}: {m} aristas exceden los {total} pares posibles')

    rng = np.random.default_rng(seed)
    if mode == 'uniform':
        rows, cols = np.triu_indices(n, k=1)
        picked = np.sort(rng.choice(total, size=m, replace=False))
        edges = np.column_stack([rows[picked], cols[picked]])
    elif mode == 'degree_preserving':
        edges = _degree_preserving(g, rng)
    else:
        raise UsageError(f'Modo de rewiring desconocido: {mode!r} (opciones: {REWIRING_MODES})')

    return g.with_edges(edges)


def gaussian_features(g: PropagationGraph, seed: SeedLike = 0) -> PropagationGraph:
    """Reemplaza las features por ruido normal estándar de la misma forma; la topología no cambia."""
    rng = np.random.default_rng(seed)
    return g.with_features(rng.standard_normal(g.features.shape))


def ablate_dataset(ds: GraphDataset, setting: str, seed: int, rewiring: str = 'uniform') -> GraphDataset:
    """
    Aplica una ablación a todos los grafos (train y test) de un dataset crudo.

    Cada grafo usa la semilla derivada (seed, índice).
    """
    if setting == 'original':
        return ds
    if setting == 'feature_only':
        graphs = [
            randomize_edges(g, np.random.SeedSequence([seed, index]), rewiring)
            for index, g in enumerate(ds.graphs)
        ]
    elif setting == 'structure_only':
        graphs = [
            gaussian_features(g, np.random.SeedSequence([seed, index, 1]))
            for index, g in enumerate(ds.graphs)
        ]
    else:
        raise UsageError(f'Ablación desconocida: {setting!r} (opciones: {SETTINGS})')
    return ds.with_graphs(graphs)


@dataclass
class AblationReport:
    """Accuracy de test en los tres escenarios y sus degradaciones."""
    dataset: str
    seed: Optional[int]
    model_kind: str
    rewiring: str
    accuracy_original: float
    accuracy_feature_only: float
    accuracy_structure_only: float

    CSV_FIELDS = (
        'dataset', 'seed', 'model_kind', 'rewiring',
        'accuracy_original', 'accuracy_feature_only', 'accuracy_structure_only',
        'degradation_structure', 'degradation_features',
    )

    @property
    def degradation_structure(self) -> float:
        """Pérdida al destruir la topología."""
        return self.accuracy_original - self.accuracy_feature_only

    @property
    def degradation_features(self) -> float:
        """Pérdida al destruir las features."""
        return self.accuracy_original - self.accuracy_structure_only

    def to_dict(self) -> Dict[str, Any]:
        return {name: getattr(self, name) for name in self.CSV_FIELDS}

    def to_row(self) -> Dict[str, Any]:
        row = self.to_dict()
        row['seed'] = '' if self.seed is None else self.seed
        return row


def run_ablation(dataset: GraphDataset, config: TrainConfig) -> AblationReport:
    """
    Entrena y evalúa tres modelos independientes (misma config y semilla) sobre los datos
    originales, con aristas aleatorias y con features gaussianas.

    Para BetterGNN las features topológicas se recalculan después del rewiring y,
    con features gaussianas, se calculan sobre la topología verdadera.
    """
    config.validate()
    raw = strip_topology(dataset)
    if not raw.splits:
        raw = split_dataset(raw, config.split_fractions, config.seed)

    accuracies: Dict[str, float] = {}
    for setting in SETTINGS:
        ablated = ablate_dataset(raw, setting, config.seed, config.rewiring)
        result = train(ablated, config)
        accuracies[setting] = evaluate(result.best, ablated, 'test').accuracy
        logger.info(f'Ablación {setting} ({config.model_kind}, seed {config.seed}): accuracy={accuracies[setting]:.4f}')

    return AblationReport(
        dataset=dataset.name,
        seed=config.seed,
        model_kind=config.model_kind,
        rewiring=config.rewiring,
        accuracy_original=accuracies['original'],
        accuracy_feature_only=accuracies['feature_only'],
        accuracy_structure_only=accuracies['structure_only'],
    )


def run_ablation_seeds(
    dataset: GraphDataset,
    config: TrainConfig,
    seeds: Sequence[int],
) -> Tuple[List[AblationReport], AblationReport]:
    """
    Repite la ablación para varias semillas.

    Si el dataset no trae splits, cada semilla usa su propio split.

    Returns:
        Tupla (reportes por semilla, reporte promedio con seed=None)
    """
    if not seeds:
        raise UsageError('Se necesita al menos una semilla')

    reports = [run_ablation(dataset, replace(config, seed=seed)) for seed in seeds]
    mean = AblationReport(
        dataset=dataset.name,
        seed=None,
        model_kind=config.model_kind,
        rewiring=config.rewiring,
        accuracy_original=float(np.mean([r.accuracy_original for r in reports])),
        accuracy_feature_only=float(np.mean([r.accuracy_feature_only for r in reports])),
        accuracy_structure_only=float(np.mean([r.accuracy_structure_only for r in reports])),
    )
    logger.info(
        f'Ablación promedio sobre {len(seeds)} semillas: degradación estructura={mean.degradation_structure:.4f}, '
        f'degradación features={mean.degradation_features:.4f}'
    )
    return reports, mean
