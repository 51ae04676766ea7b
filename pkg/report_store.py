"""
Report Store
Persistencia de resultados en disco: logs de épocas, reportes JSON y los CSV del análisis topológico.
"""
import csv
import json
import logging
import os
from typing import Any, Dict, Iterable, Sequence

from topology_analysis import FEATURES, TopoReport


logger = logging.getLogger(__name__)

EPOCH_FIELDS = ('epoch', 'train_loss', 'val_accuracy', 'val_macro_f1', 'val_auc')
BOXSTATS_FIELDS = ('feature', 'label', 'min', 'q1', 'median', 'q3', 'max', 'mean')
SCATTER_FIELDS = ('graph_id', 'label', 'avg_degree', 'mean_clustering')
HISTOGRAM_FIELDS = ('bin', 'left', 'right', 'count_real', 'count_fake')
CORRELATION_FIELDS = ('feature',) + FEATURES


class CsvStore:
    """
    Archivo CSV de columnas fijas al que se agregan filas.

    El header se escribe solo si el archivo no existe o está vacío.
    """

    def __init__(self, file_path: str, fieldnames: Sequence[str]) -> None:
        self.file_path = file_path
        self.fieldnames = list(fieldnames)
        self._ensure_file_with_header()

    def _ensure_file_with_header(self) -> None:
        file_exists = os.path.exists(self.file_path)
        needs_header = (not file_exists) or os.path.getsize(self.file_path) == 0

        if needs_header:
            with open(self.file_path, mode='w', newline='', encoding='utf-8') as csv_file:
                writer = csv.DictWriter(csv_file, fieldnames=self.fieldnames)
                writer.writeheader()

    def append_row(self, row: Dict[str, Any]) -> None:
        self.append_rows([row])

    def append_rows(self, rows: Iterable[Dict[str, Any]]) -> None:
        with open(self.file_path, mode='a', newline='', encoding='utf-8') as csv_file:
            writer = csv.DictWriter(csv_file, fieldnames=self.fieldnames)
            for row in rows:
                writer.writerow(row)


def write_csv(path: str, fieldnames: Sequence[str], rows: Iterable[Dict[str, Any]]) -> str:
    """Escribe un CSV desde cero (reemplaza el archivo si existía)."""
    if os.path.exists(path):
        os.remove(path)
    CsvStore(path, fieldnames).append_rows(rows)
    return path


def write_json(path: str, data: Any) -> str:
    with open(path, mode='w', encoding='utf-8') as f:
        json.dump(data, f, ensure_ascii=False, indent=2)
        f.write('\n')
    return path


def epoch_log_store(out_dir: str, previous_rows: Iterable[Dict[str, Any]] = ()) -> CsvStore:
    """
    Abre epochs.csv desde cero con las filas previas dadas (las del checkpoint al reanudar).

    El archivo siempre refleja solo la corrida actual.
    """
    path = write_csv(os.path.join(out_dir, 'epochs.csv'), EPOCH_FIELDS, previous_rows)
    return CsvStore(path, EPOCH_FIELDS)


def write_topo_report(report: TopoReport, out_dir: str) -> Dict[str, str]:
    """
    Escribe report.json y los cuatro CSV listos para graficar.

    Returns:
        Diccionario nombre -> ruta de cada archivo escrito
    """
    os.makedirs(out_dir, exist_ok=True)

    boxstats_rows = [
        {'feature': feature, 'label': label, **stats.to_dict()}
        for feature, per_class in report.boxstats.items()
        for label, stats in per_class.items()
    ]
    scatter_rows = [point.__dict__ for point in report.scatter]
    edges = report.histogram_edges
    histogram_rows = [
        {
            'bin': index,
            'left': float(edges[index]),
            'right': float(edges[index + 1]),
            'count_real': int(report.histogram_counts['real'][index]),
            'count_fake': int(report.histogram_counts['fake'][index]),
        }
        for index in range(len(edges) - 1)
    ]
    correlation_rows = [
        {'feature': feature, **{other: float(report.correlation[i, j]) for j, other in enumerate(FEATURES)}}
        for i, feature in enumerate(FEATURES)
    ]

    files = {
        'report': write_json(os.path.join(out_dir, 'report.json'), report.to_dict()),
        'boxstats': write_csv(os.path.join(out_dir, 'boxstats.csv'), BOXSTATS_FIELDS, boxstats_rows),
        'scatter': write_csv(os.path.join(out_dir, 'scatter.csv'), SCATTER_FIELDS, scatter_rows),
        'histogram': write_csv(os.path.join(out_dir, 'histogram.csv'), HISTOGRAM_FIELDS, histogram_rows),
        'correlation': write_csv(os.path.join(out_dir, 'correlation.csv'), CORRELATION_FIELDS, correlation_rows),
    }
    logger.info(f'Reporte topológico escrito en {out_dir}')
    return files
