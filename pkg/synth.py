"""
Synth
Generador sintético de cascadas de propagación con señal de clase controlable.

Cada grafo es un árbol recursivo aleatorio con raíz en el nodo 0 (una cascada de retweets)
al que se le cierran cuñas en triángulos con probabilidad base_closure + label · structure_signal.
Las features son normales estándar desplazadas en label · feature_signal sobre las primeras
8 coordenadas.
"""
import logging
from itertools import combinations
from typing import List

import numpy as np

from config import SynthConfig
from propagation_graph import GraphDataset, PropagationGraph, undirected_edges, validate_graph


logger = logging.getLogger(__name__)

SIGNAL_COORDINATES = 8


def _recursive_tree(rng: np.random.Generator, num_nodes: int) -> List[List[int]]:
    # el nodo i se cuelga de un padre uniforme en [0, i)
    parents = np.floor(rng.random(num_nodes - 1) * np.arange(1, num_nodes)).astype(np.int64)
    adjacency: List[List[int]] = [[] for _ in range(num_nodes)]
    for child, parent in enumerate(parents.tolist(), start=1):
        adjacency[parent].append(child)
        adjacency[child].append(parent)
    return adjacency


def generate_graph(
    rng: np.random.Generator,
    graph_id: str,
    label: int,
    config: SynthConfig,
) -> PropagationGraph:
    """
    Genera una cascada.

    Args:
        rng: Generador propio del grafo
        graph_id: Identificador
        label: 0 (real) o 1 (fake)
        config: Parámetros del generador

    Returns:
        Grafo válido con raíz 0
    """
    num_nodes = int(rng.integers(config.min_nodes, config.max_nodes + 1))
    adjacency = _recursive_tree(rng, num_nodes)

    edges = [(min(v, u), max(v, u)) for v in range(num_nodes) for u in adjacency[v] if v < u]

    # en un árbol cada par a distancia 2 tiene un único centro: las cuñas no se repiten
    wedges = [pair for center in range(num_nodes) for pair in combinations(sorted(adjacency[center]), 2)]
    closure = min(1.0, config.base_closure + label * config.structure_signal)
    draws = rng.random(len(wedges))
    edges.extend(pair for pair, draw in zip(wedges, draws.tolist()) if draw < closure)

    features = rng.standard_normal((num_nodes, config.feat_dim))
    features[:, :min(SIGNAL_COORDINATES, config.feat_dim)] += label * config.feature_signal

    return PropagationGraph(
        id=graph_id,
        num_nodes=num_nodes,
        edges=undirected_edges(edges),
        features=features,
        root=0,
        label=label,
    )


def generate(config: SynthConfig) -> GraphDataset:
    """
    Genera un dataset balanceado de 2 · graphs_per_class grafos, sin splits.

    Las etiquetas alternan real/fake. Cada grafo usa un generador derivado de la semilla
    con SeedSequence.spawn, así el resultado no depende del orden de generación.
    """
    config.validate()
    total = 2 * config.graphs_per_class
    children = np.random.SeedSequence(config.seed).spawn(total)

    graphs = [
        validate_graph(generate_graph(np.random.default_rng(child), f'synth-{index:05d}', index % 2, config))
        for index, child in enumerate(children)
    ]

    logger.info(
        f'Dataset sintético generado: {total} grafos, feat_dim={config.feat_dim}, '
        f'structure_signal={config.structure_signal}, feature_signal={config.feature_signal}, seed={config.seed}'
    )
    return GraphDataset(graphs=graphs, name=f'synth-seed{config.seed}')


def toy_dataset(seed: int = 0, num_graphs: int = 4, feat_dim: int = 4) -> GraphDataset:
    """Dataset mínimo (grafos de 5 a 8 nodos, con triángulos) para chequeos de gradientes."""
    config = SynthConfig(
        graphs_per_class=max(1, num_graphs // 2),
        min_nodes=5,
        max_nodes=8,
        feat_dim=feat_dim,
        structure_signal=0.5,
        feature_signal=1.0,
        base_closure=0.3,
        seed=seed,
    )
    return generate(config)
