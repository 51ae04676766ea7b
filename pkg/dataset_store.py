"""
Dataset Store
Persistencia de datasets de cascadas (JSON por línea) y de resúmenes topológicos (CSV).

Formato del dataset:
    línea 1:  {"format": "bettergnn-dataset", "version": 1, "feat_dim": d,
               "augmented": false, "num_graphs": N}
    líneas 2+: {"id": ..., "label": 0|1, "num_nodes": n, "root": r,
                "edges": [[u, v], ...], "features": [[...], ...], "split": "train"}
"""
import csv
import json
import logging
from typing import Any, Dict, List, Sequence

from errors import DataError, ParseError, ValidationFailed, VersionMismatch
from propagation_graph import SPLITS, GraphDataset, PropagationGraph, graph_from_lists, validate_graph
from topo_features import TopoSummary


logger = logging.getLogger(__name__)

DATASET_FORMAT = 'bettergnn-dataset'
DATASET_VERSION = 1
RECORD_KEYS = ('id', 'label', 'num_nodes', 'root', 'edges', 'features')
SUMMARY_FIELDS = (
    'graph_id', 'label', 'avg_degree', 'mean_degree_centrality', 'mean_clustering', 'density', 'node_count',
)


def _dumps(data: Dict[str, Any]) -> str:
    return json.dumps(data, ensure_ascii=False, separators=(',', ':'))


def save_dataset(ds: GraphDataset, path: str):
    """
    Guarda el dataset. Los floats usan la representación más corta que se relee exacta.

    Args:
        ds: Dataset a guardar
        path: Ruta del archivo
    """
    header = {
        'format': DATASET_FORMAT,
        'version': DATASET_VERSION,
        'feat_dim': ds.feat_dim,
        'augmented': ds.augmented,
        'num_graphs': len(ds),
    }
    with open(path, mode='w', encoding='utf-8', newline='\n') as f:
        f.write(_dumps(header) + '\n')
        for g in ds.graphs:
            record: Dict[str, Any] = {
                'id': g.id,
                'label': g.label,
                'num_nodes': g.num_nodes,
                'root': g.root,
                'edges': g.edges.tolist(),
                'features': g.features.tolist(),
            }
            if g.id in ds.splits:
                record['split'] = ds.splits[g.id]
            f.write(_dumps(record) + '\n')

    logger.info(f'Dataset {ds.name} guardado en {path} ({len(ds)} grafos)')


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _parse_header(line: str) -> Dict[str, Any]:
    try:
        header = json.loads(line)
    except json.JSONDecodeError as e:
        raise ParseError(1, f'encabezado JSON inválido ({e.msg})') from e
    if not isinstance(header, dict) or header.get('format') != DATASET_FORMAT:
        raise ParseError(1, f'no es un archivo {DATASET_FORMAT}')
    if header.get('version') != DATASET_VERSION:
        raise VersionMismatch(
            f'Versión de dataset {header.get("version")!r} no soportada (se espera {DATASET_VERSION})'
        )
    for key in ('feat_dim', 'num_graphs'):
        if not _is_int(header.get(key)):
            raise ParseError(1, f'falta el entero {key!r} en el encabezado')
    return header


def _parse_record(line_number: int, line: str, feat_dim: int) -> Dict[str, Any]:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as e:
        raise ParseError(line_number, f'JSON inválido ({e.msg})') from e
    if not isinstance(record, dict):
        raise ParseError(line_number, 'se esperaba un objeto JSON')

    missing = [key for key in RECORD_KEYS if key not in record]
    if missing:
        raise ParseError(line_number, f'faltan claves: {", ".join(missing)}')
    if 'split' in record and record['split'] not in SPLITS:
        raise ParseError(line_number, f'split desconocido {record["split"]!r}')
    if not isinstance(record['id'], str):
        raise ParseError(line_number, f'id debe ser un string, se recibió {record["id"]!r}')
    for key in ('num_nodes', 'root', 'label'):
        if not _is_int(record[key]):
            raise ParseError(line_number, f'{key} debe ser un entero, se recibió {record[key]!r}')

    edges = record['edges']
    if not isinstance(edges, list):
        raise ParseError(line_number, 'edges debe ser una lista de pares')
    for index, pair in enumerate(edges):
        if not isinstance(pair, list) or len(pair) != 2 or not all(_is_int(v) for v in pair):
            raise ParseError(line_number, f'la arista {index} debe ser un par de enteros, se recibió {pair!r}')

    rows = record['features']
    if not isinstance(rows, list) or any(not isinstance(row, list) for row in rows):
        raise ParseError(line_number, 'features debe ser una lista de filas')
    for index, row in enumerate(rows):
        if len(row) != feat_dim:
            raise ParseError(
                line_number, f'la fila {index} de features tiene {len(row)} columnas, el encabezado declara {feat_dim}'
            )
        if any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in row):
            raise ParseError(line_number, f'la fila {index} de features tiene valores no numéricos')
    return record


def load_dataset(path: str, name: str = '') -> GraphDataset:
    """
    Carga un dataset; cada grafo se valida.

    Raises:
        ParseError: Línea mal formada (incluye número de línea)
        VersionMismatch: Versión de formato no soportada
        ValidationFailed: Un grafo viola los invariantes
    """
    try:
        with open(path, mode='r', encoding='utf-8') as f:
            lines = f.read().split('\n')
    except OSError as e:
        raise DataError(f'No se pudo leer el dataset {path}: {e}') from e

    if not lines or not lines[0].strip():
        raise ParseError(1, 'archivo vacío o sin encabezado')
    header = _parse_header(lines[0])
    feat_dim = header['feat_dim']

    graphs: List[PropagationGraph] = []
    splits: Dict[str, str] = {}
    seen = set()

    for line_number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        record = _parse_record(line_number, line, feat_dim)
        try:
            g = graph_from_lists(
                str(record['id']), int(record['num_nodes']), record['edges'],
                record['features'], int(record['root']), int(record['label']),
            )
            if g.features.shape[1] != feat_dim:
                raise ParseError(line_number, f'feat_dim {g.features.shape[1]} distinto del encabezado ({feat_dim})')
            validate_graph(g)
        except ParseError:
            raise
        except (DataError, TypeError, ValueError) as e:
            raise ValidationFailed(f'Línea {line_number}: {e}') from e

        if g.label not in (0, 1):
            raise ValidationFailed(f'Línea {line_number}: etiqueta {g.label} fuera de {{0, 1}}')
        if g.id in seen:
            raise ValidationFailed(f'Línea {line_number}: id de grafo duplicado {g.id!r}')
        seen.add(g.id)
        graphs.append(g)
        if 'split' in record:
            splits[g.id] = record['split']

    if len(graphs) != header['num_graphs']:
        raise ParseError(
            len(lines), f'el encabezado declara {header["num_graphs"]} grafos pero hay {len(graphs)}'
        )

    logger.info(f'Dataset cargado desde {path}: {len(graphs)} grafos, feat_dim={feat_dim}')
    return GraphDataset(graphs, splits, bool(header.get('augmented', False)), name or path)


def write_summaries(summaries: Sequence[TopoSummary], path: str):
    """Escribe los resúmenes topológicos como CSV con columnas fijas."""
    with open(path, mode='w', newline='', encoding='utf-8') as csv_file:
        writer = csv.DictWriter(csv_file, fieldnames=SUMMARY_FIELDS)
        writer.writeheader()
        for summary in summaries:
            writer.writerow(summary.to_dict())


def read_summaries(path: str) -> List[TopoSummary]:
    """
    Lee un CSV de resúmenes.

    Raises:
        ParseError: Encabezado incorrecto o fila inválida (con número de línea)
    """
    try:
        csv_file = open(path, mode='r', newline='', encoding='utf-8')
    except OSError as e:
        raise DataError(f'No se pudo leer {path}: {e}') from e

    summaries = []
    with csv_file:
        reader = csv.DictReader(csv_file)
        if tuple(reader.fieldnames or ()) != SUMMARY_FIELDS:
            raise ParseError(1, f'encabezado inesperado; se esperaba {",".join(SUMMARY_FIELDS)}')
        for line_number, row in enumerate(reader, start=2):
            try:
                summaries.append(
                    TopoSummary(
                        graph_id=row['graph_id'],
                        label=int(row['label']),
                        avg_degree=float(row['avg_degree']),
                        mean_degree_centrality=float(row['mean_degree_centrality']),
                        mean_clustering=float(row['mean_clustering']),
                        density=float(row['density']),
                        node_count=int(row['node_count']),
                    )
                )
            except (TypeError, ValueError) as e:
                raise ParseError(line_number, f'fila inválida ({e})') from e
    return summaries
