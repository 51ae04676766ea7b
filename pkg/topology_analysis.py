"""
Topology Analysis
Análisis descriptivo a nivel dataset de las cinco estadísticas topológicas:
box stats por clase, puntos de dispersión, histograma de tamaños y correlación.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

from errors import InsufficientData
from propagation_graph import LABEL_NAMES
from topo_features import TopoSummary


logger = logging.getLogger(__name__)

FEATURES = ('avg_degree', 'mean_degree_centrality', 'mean_clustering', 'density', 'node_count')
HISTOGRAM_BINS = 20
REDUNDANCY_THRESHOLD = 0.6


@dataclass(frozen=True)
class BoxStats:
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float
    mean: float

    @classmethod
    def of(cls, values: np.ndarray) -> 'BoxStats':
        """Cuartiles por interpolación lineal."""
        q = np.percentile(values, [0, 25, 50, 75, 100])
        return cls(float(q[0]), float(q[1]), float(q[2]), float(q[3]), float(q[4]), float(np.mean(values)))

    def to_dict(self) -> Dict[str, float]:
        return {
            'min': self.minimum, 'q1': self.q1, 'median': self.median,
            'q3': self.q3, 'max': self.maximum, 'mean': self.mean,
        }


@dataclass(frozen=True)
class ScatterPoint:
    graph_id: str
    label: int
    avg_degree: float
    mean_clustering: float


@dataclass(frozen=True)
class ClassComparison:
    feature: str
    mean_real: float
    mean_fake: float
    direction: int


@dataclass
class TopoReport:
    """
    Reporte topológico de un dataset.

    Attributes:
        boxstats: feature -> nombre de clase -> BoxStats (solo clases presentes)
        scatter: Puntos (avg_degree, mean_clustering) por grafo, ordenados por graph_id
        histogram_edges: 21 bordes de bin sobre el rango conjunto de node_count
        histogram_counts: nombre de clase -> 20 conteos
        correlation: Matriz 5 × 5 de Pearson en el orden de FEATURES
        degenerate_features: Features de varianza cero (correlación 0 fuera de la diagonal)
    """
    boxstats: Dict[str, Dict[str, BoxStats]]
    scatter: List[ScatterPoint]
    histogram_edges: np.ndarray
    histogram_counts: Dict[str, np.ndarray]
    correlation: np.ndarray
    degenerate_features: List[str] = field(default_factory=list)
    num_graphs: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            'features': list(FEATURES),
            'num_graphs': self.num_graphs,
            'boxstats': {
                feature: {name: stats.to_dict() for name, stats in per_class.items()}
                for feature, per_class in self.boxstats.items()
            },
            'scatter': [point.__dict__ for point in self.scatter],
            'histogram': {
                'edges': self.histogram_edges.tolist(),
                'counts': {name: counts.tolist() for name, counts in self.histogram_counts.items()},
            },
            'correlation': self.correlation.tolist(),
            'degenerate_features': list(self.degenerate_features),
        }


def _correlation(matrix: np.ndarray) -> Tuple[np.ndarray, List[str]]:
    k = matrix.shape[1]
    degenerate = np.std(matrix, axis=0) == 0
    corr = np.eye(k)
    live = np.flatnonzero(~degenerate)
    if live.size > 1:
        corr[np.ix_(live, live)] = np.corrcoef(matrix[:, live], rowvar=False)
    corr = np.clip((corr + corr.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    return corr, [FEATURES[i] for i in np.flatnonzero(degenerate)]


def build_report(summaries: Sequence[TopoSummary]) -> TopoReport:
    """
    Construye el reporte topológico.

    La correlación se calcula con ambas clases juntas; el histograma usa 20 bins de igual
    ancho sobre el rango conjunto de node_count. El resultado no depende del orden de entrada.

    Raises:
        InsufficientData: Si alguna clase presente tiene menos de 2 grafos, o no hay grafos
    """
    rows = sorted(summaries, key=lambda s: (s.graph_id, s.label))
    if not rows:
        raise InsufficientData('No hay resúmenes para analizar')

    labels = np.array([s.label for s in rows], dtype=np.int64)
    matrix = np.array([[float(getattr(s, f)) for f in FEATURES] for s in rows], dtype=np.float64)

    present = [label for label in sorted(LABEL_NAMES) if np.any(labels == label)]
    for label in present:
        count = int(np.sum(labels == label))
        if count < 2:
            raise InsufficientData(f'La clase {LABEL_NAMES[label]} tiene {count} grafo(s); se necesitan al menos 2')

    boxstats = {
        feature: {LABEL_NAMES[label]: BoxStats.of(matrix[labels == label, j]) for label in present}
        for j, feature in enumerate(FEATURES)
    }

    node_counts = matrix[:, FEATURES.index('node_count')]
    edges = np.histogram_bin_edges(node_counts, bins=HISTOGRAM_BINS)
    counts = {
        LABEL_NAMES[label]: np.histogram(node_counts[labels == label], bins=edges)[0]
        for label in sorted(LABEL_NAMES)
    }

    correlation, degenerate = _correlation(matrix)
    if degenerate:
        logger.warning(f'Features sin varianza (correlación reportada como 0): {", ".join(degenerate)}')

    scatter = [ScatterPoint(s.graph_id, s.label, s.avg_degree, s.mean_clustering) for s in rows]

    logger.info(f'Reporte topológico: {len(rows)} grafos, clases presentes {[LABEL_NAMES[l] for l in present]}')
    return TopoReport(boxstats, scatter, edges, counts, correlation, degenerate, len(rows))


def compare_classes(report: TopoReport) -> List[ClassComparison]:
    """
    Medias por clase de cada feature y el signo de (fake - real). Descriptivo, sin tests.

    Raises:
        InsufficientData: Si el reporte no tiene ambas clases
    """
    comparisons = []
    for feature in FEATURES:
        per_class = report.boxstats[feature]
        if 'real' not in per_class or 'fake' not in per_class:
            raise InsufficientData('compare_classes necesita ambas clases en el reporte')
        mean_real, mean_fake = per_class['real'].mean, per_class['fake'].mean
        comparisons.append(ClassComparison(feature, mean_real, mean_fake, int(np.sign(mean_fake - mean_real))))
    return comparisons


def redundant_feature_pairs(
    report: TopoReport, threshold: float = REDUNDANCY_THRESHOLD
) -> List[Tuple[str, str, float]]:
    """Pares de features con |ρ| > threshold."""
    pairs = []
    for i in range(len(FEATURES)):
        for j in range(i + 1, len(FEATURES)):
            rho = float(report.correlation[i, j])
            if abs(rho) > threshold:
                pairs.append((FEATURES[i], FEATURES[j], rho))
    return pairs
