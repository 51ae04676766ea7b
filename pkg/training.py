"""
Training
Optimizador Adam, loop de entrenamiento con selección por macro-F1 de validación,
evaluación y comparación de modelos.
"""
import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional, Sequence, Union

import numpy as np
from sklearn.metrics import confusion_matrix, precision_recall_fscore_support, roc_auc_score

from config import MODEL_KINDS, TrainConfig
from errors import DimMismatch, EmptySplit, LabelOutOfRange, NoGradient
from model import Checkpoint, GraphClassifier, build_model
from nn_core import Parameter, check_finite
from propagation_graph import GraphDataset, PropagationGraph, batch_graphs, split_dataset
from topo_features import augment_dataset


logger = logging.getLogger(__name__)

EVAL_BATCH_SIZE = 256


# ========== Optimizador ==========

def adam_step(
    params: Sequence[Parameter],
    learning_rate: float,
    weight_decay: float = 0.0,
    beta1: float = 0.9,
    beta2: float = 0.999,
    epsilon: float = 1e-8,
):
    """
    Un paso de Adam con corrección de sesgo y weight decay L2 acoplado.

    El decay (grad += wd · θ) se suma antes de actualizar los momentos y solo
    a parámetros con decay=True.

    Raises:
        NoGradient: Si algún parámetro no recibió gradiente desde el último zero_grad()
    """
    for p in params:
        if not p.has_grad:
            raise NoGradient(f'{p!r} no tiene gradiente: falta backward()')

    for p in params:
        grad = p.grad + weight_decay * p.value if p.decay and weight_decay else p.grad
        p.step_count += 1
        p.m *= beta1
        p.m += (1.0 - beta1) * grad
        p.v *= beta2
        p.v += (1.0 - beta2) * grad * grad
        m_hat = p.m / (1.0 - beta1 ** p.step_count)
        v_hat = p.v / (1.0 - beta2 ** p.step_count)
        p.value -= learning_rate * m_hat / (np.sqrt(v_hat) + epsilon)
        check_finite(p.value, 'parámetros tras el paso de Adam')


class Adam:
    """Adam sobre los parámetros de un modelo; el estado vive en cada Parameter."""

    def __init__(self, params: Sequence[Parameter], learning_rate: float = 1e-3, weight_decay: float = 0.0):
        self.params = list(params)
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay

    def step(self):
        adam_step(self.params, self.learning_rate, self.weight_decay)


# ========== Métricas ==========

@dataclass
class EvalReport:
    """
    Métricas de clasificación de un split.

    precision / recall / f1 / support están indexados por clase (0 = real, 1 = fake).
    confusion[i][j] cuenta grafos de clase i predichos como j.
    """
    accuracy: float
    macro_f1: float
    auc: float
    precision: List[float]
    recall: List[float]
    f1: List[float]
    support: List[int]
    confusion: List[List[int]]
    num_graphs: int
    split: str = ''

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def classification_report(
    labels: Sequence[int],
    predictions: Sequence[int],
    fake_scores: Sequence[float],
    split: str = '',
) -> EvalReport:
    """
    Calcula accuracy, macro-F1, AUC, métricas por clase y matriz de confusión.

    Una clase sin predicciones ni ejemplos aporta F1 = 0. El AUC usa el estadístico
    de rangos con empates contados como 0.5; con una sola clase presente se reporta 0.5.

    Raises:
        EmptySplit: Si no hay ejemplos
        LabelOutOfRange: Si hay etiquetas o predicciones fuera de {0, 1}
    """
    labels = np.asarray(labels, dtype=np.int64)
    predictions = np.asarray(predictions, dtype=np.int64)
    fake_scores = np.asarray(fake_scores, dtype=np.float64)

    if labels.size == 0:
        raise EmptySplit('No hay grafos para evaluar')
    for name, values in (('etiquetas', labels), ('predicciones', predictions)):
        if np.any((values < 0) | (values > 1)):
            raise LabelOutOfRange(f'{name} fuera de {{0, 1}}: {np.unique(values).tolist()}')

    precision, recall, f1, support = precision_recall_fscore_support(
        labels, predictions, labels=[0, 1], zero_division=0
    )

    if np.unique(labels).size < 2:
        logger.warning(f'Split {split or "?"} con una sola clase: AUC reportado como 0.5')
        auc = 0.5
    else:
        auc = float(roc_auc_score(labels, fake_scores))

    return EvalReport(
        accuracy=float(np.mean(labels == predictions)),
        macro_f1=float(np.mean(f1)),
        auc=auc,
        precision=[float(x) for x in precision],
        recall=[float(x) for x in recall],
        f1=[float(x) for x in f1],
        support=[int(x) for x in support],
        confusion=confusion_matrix(labels, predictions, labels=[0, 1]).tolist(),
        num_graphs=int(labels.size),
        split=split,
    )


def predict_graphs(model: GraphClassifier, graphs: Sequence[PropagationGraph]) -> np.ndarray:
    """Probabilidades en modo eval, en el orden de graphs."""
    model.eval()
    chunks = [
        model.predict_proba(batch_graphs(graphs[start:start + EVAL_BATCH_SIZE]))
        for start in range(0, len(graphs), EVAL_BATCH_SIZE)
    ]
    return np.vstack(chunks)


def evaluate_graphs(model: GraphClassifier, graphs: Sequence[PropagationGraph], split: str = '') -> EvalReport:
    if not graphs:
        raise EmptySplit(f'El split {split or "?"} está vacío')
    # orden canónico: el reporte no depende del orden de entrada
    graphs = sorted(graphs, key=lambda g: g.id)
    probs = predict_graphs(model, graphs)
    return classification_report(
        [g.label for g in graphs], np.argmax(probs, axis=1), probs[:, 1], split
    )


def prepare_dataset(ds: GraphDataset, model_kind: str) -> GraphDataset:
    """
    Adapta el dataset al tipo de modelo: BetterGNN usa features aumentadas,
    los baselines usan features crudas.

    Raises:
        DimMismatch: Si se pide un baseline sobre un dataset aumentado
    """
    if model_kind == 'better_gnn':
        return ds if ds.augmented else augment_dataset(ds)
    if ds.augmented:
        raise DimMismatch(f'El baseline {model_kind} no acepta features aumentadas (dataset {ds.name})')
    return ds


def evaluate(checkpoint: Union[Checkpoint, GraphClassifier], dataset: GraphDataset, split: str = 'test') -> EvalReport:
    """
    Evalúa un checkpoint sobre un split del dataset.

    Raises:
        EmptySplit: Si el split no tiene grafos
    """
    model = checkpoint.model if isinstance(checkpoint, Checkpoint) else checkpoint
    dataset = prepare_dataset(dataset, model.kind)
    report = evaluate_graphs(model, dataset.subset(split), split)
    logger.info(
        f'Evaluación {model.kind} en {split}: accuracy={report.accuracy:.4f}, '
        f'macro-F1={report.macro_f1:.4f}, AUC={report.auc:.4f}'
    )
    return report


# ========== Entrenamiento ==========

@dataclass
class EpochLog:
    epoch: int
    train_loss: float
    val_accuracy: float
    val_macro_f1: float
    val_auc: float

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class TrainResult:
    """Checkpoint de la mejor época (macro-F1 de validación), el de la última y el log."""
    best: Checkpoint
    last: Checkpoint
    log: List[EpochLog] = field(default_factory=list)


def make_batches(order: np.ndarray, batch_size: int) -> List[np.ndarray]:
    """
    Parte una permutación en batches consecutivos.

    Un último batch de un solo grafo se une al anterior (batchnorm necesita dos filas).
    """
    batches = [order[start:start + batch_size] for start in range(0, len(order), batch_size)]
    if len(batches) > 1 and len(batches[-1]) == 1:
        tail = batches.pop()
        batches[-1] = np.concatenate([batches[-1], tail])
    return batches


def _ensure_splits(dataset: GraphDataset, config: TrainConfig) -> GraphDataset:
    if dataset.splits:
        return dataset
    return split_dataset(dataset, config.split_fractions, config.seed)


def train(
    dataset: GraphDataset,
    config: TrainConfig,
    resume_from: Optional[Checkpoint] = None,
    best_so_far: Optional[Checkpoint] = None,
    on_epoch: Optional[Callable[[EpochLog, Checkpoint], None]] = None,
) -> TrainResult:
    """
    Entrena un modelo y selecciona la época con mejor macro-F1 de validación.

    Si el dataset no tiene splits se dividen con config.split_fractions y config.seed.
    Para reanudar se pasa el último checkpoint (y el mejor): la trayectoria es idéntica
    a la de un entrenamiento sin interrupción.

    Args:
        dataset: Dataset (crudo o aumentado según el modelo)
        config: Hiperparámetros validados
        resume_from: Checkpoint desde el cual continuar
        best_so_far: Mejor checkpoint previo al reanudar
        on_epoch: Callback opcional con el log y el checkpoint de cada época

    Returns:
        TrainResult

    Raises:
        EmptySplit: Si train o val no tienen grafos, o si better_gnn tiene menos de 2 grafos de train
    """
    config.validate()
    dataset = _ensure_splits(prepare_dataset(dataset, config.model_kind), config)
    train_graphs = dataset.subset('train')
    val_graphs = dataset.subset('val')
    if not train_graphs:
        raise EmptySplit(f'El dataset {dataset.name} no tiene grafos de train')
    if not val_graphs:
        raise EmptySplit(f'El dataset {dataset.name} no tiene grafos de val')
    if config.model_kind == 'better_gnn' and len(train_graphs) < 2:
        raise EmptySplit(
            f'El dataset {dataset.name} tiene {len(train_graphs)} grafo de train; better_gnn necesita al menos 2 '
            f'(batchnorm en la cabeza)'
        )

    shuffle_rng = np.random.default_rng(config.seed)
    if resume_from is not None:
        model = Checkpoint.snapshot(resume_from.model).model
        start_epoch = resume_from.epoch
        shuffle_rng.bit_generator.state = resume_from.train_state['shuffle_rng']
        log = [EpochLog(**entry) for entry in resume_from.train_state.get('log', [])]
        best = best_so_far if best_so_far is not None else resume_from
        logger.info(f'Reanudando {model.kind} desde la época {start_epoch}')
    else:
        model = build_model(
            config.model_kind, dataset.feat_dim, config.hidden_dim,
            config.dropout_rate, config.seed, config.concat_news,
        )
        start_epoch = 0
        log = []
        best = None

    best_f1 = best.metrics.get('val_macro_f1', -1.0) if best is not None else -1.0
    optimizer = Adam(model.parameters(), config.learning_rate, config.weight_decay)
    last = resume_from

    logger.info(
        f'Entrenando {model.kind}: {len(train_graphs)} train / {len(val_graphs)} val, '
        f'épocas {start_epoch + 1}..{config.epochs}, lr={config.learning_rate}, batch={config.batch_size}'
    )

    for epoch in range(start_epoch + 1, config.epochs + 1):
        model.train()
        total_loss = 0.0
        for indices in make_batches(shuffle_rng.permutation(len(train_graphs)), config.batch_size):
            batch = batch_graphs([train_graphs[i] for i in indices])
            model.zero_grad()
            total_loss += model.loss(batch) * len(indices)
            model.loss_backward()
            optimizer.step()

        val = evaluate_graphs(model, val_graphs, 'val')
        entry = EpochLog(epoch, total_loss / len(train_graphs), val.accuracy, val.macro_f1, val.auc)
        log.append(entry)
        logger.info(
            f'Época {epoch}/{config.epochs}: loss={entry.train_loss:.4f}, val_acc={entry.val_accuracy:.4f}, '
            f'val_macro_f1={entry.val_macro_f1:.4f}, val_auc={entry.val_auc:.4f}'
        )

        last = Checkpoint.snapshot(
            model,
            epoch=epoch,
            metrics={'val_accuracy': val.accuracy, 'val_macro_f1': val.macro_f1, 'val_auc': val.auc},
            train_state={
                'shuffle_rng': shuffle_rng.bit_generator.state,
                'log': [e.to_dict() for e in log],
                'config': config.to_dict(),
            },
        )
        if val.macro_f1 > best_f1:
            best, best_f1 = last, val.macro_f1
        if on_epoch is not None:
            on_epoch(entry, last)

    if last is None:
        last = Checkpoint.snapshot(model, epoch=start_epoch)
    if best is None:
        best = last

    logger.info(f'Mejor época de {model.kind}: {best.epoch} (val macro-F1 {best_f1:.4f})')
    return TrainResult(best=best, last=last, log=log)


def compare_models(
    dataset: GraphDataset,
    config: TrainConfig,
    kinds: Sequence[str] = MODEL_KINDS,
) -> Dict[str, Any]:
    """
    Entrena y evalúa varios modelos sobre el mismo split y compara contra el primer baseline.

    Args:
        dataset: Dataset con features crudas
        config: Configuración común (model_kind se reemplaza por cada tipo)
        kinds: Modelos a comparar

    Returns:
        Diccionario con 'reports' (EvalReport de test por modelo) y 'deltas'
        (macro-F1 y AUC de cada modelo menos los del baseline de referencia)
    """
    dataset = _ensure_splits(dataset, config)
    reports: Dict[str, EvalReport] = {}

    for kind in kinds:
        result = train(dataset, replace(config, model_kind=kind))
        reports[kind] = evaluate(result.best, dataset, 'test')

    reference = next((k for k in kinds if k != 'better_gnn'), kinds[0])
    deltas = {
        kind: {
            'macro_f1': reports[kind].macro_f1 - reports[reference].macro_f1,
            'auc': reports[kind].auc - reports[reference].auc,
        }
        for kind in kinds
    }
    return {'reference': reference, 'reports': reports, 'deltas': deltas}
