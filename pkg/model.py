"""
Model
Arquitectura BetterGNN, los tres baselines (GCN, GraphSAGE, GAT) y checkpoints.

BetterGNN:  X(aumentada) -> GIN -> ReLU -> AttentionPool -> Linear -> BatchNorm -> ReLU
            -> Dropout -> Linear(2) -> Softmax
Baseline:   X(cruda) -> Conv -> ReLU -> GlobalMaxPool -> [concat raíz] -> Linear(2) -> Softmax
"""
import copy
import json
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np

from errors import DimMismatch, ModelError, NoForwardPass, UsageError, ValidationFailed
from nn_core import (
    AttentionPool,
    BatchNorm,
    Dropout,
    GATConv,
    GCNConv,
    GINConv,
    GlobalMaxPool,
    Linear,
    Module,
    ReLU,
    SAGEConv,
    check_finite,
    cross_entropy,
    softmax_cross_entropy_grad,
    softmax_rows,
)
from propagation_graph import BatchedGraph


logger = logging.getLogger(__name__)

NUM_CLASSES = 2
BASELINE_CONVS = {'gcn': GCNConv, 'sage': SAGEConv, 'gat': GATConv}
CHECKPOINT_FORMAT = 'bettergnn-checkpoint'
CHECKPOINT_VERSION = 1


class GraphClassifier(Module):
    """
    Clasificador de grafos: forward(batch) -> probabilidades (num_graphs × 2).

    Expone loss()/loss_backward() para el entrenamiento y el chequeo de gradientes.
    """

    kind = ''

    def __init__(self, input_dim: int, hidden_dim: int, dropout_rate: float, seed: int, concat_news: bool):
        super().__init__()
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.dropout_rate = dropout_rate
        self.seed = seed
        self.concat_news = concat_news
        self._loss_cache = None

    def hyperparameters(self) -> Dict[str, Any]:
        return {
            'kind': self.kind,
            'input_dim': self.input_dim,
            'hidden_dim': self.hidden_dim,
            'dropout_rate': self.dropout_rate,
            'seed': self.seed,
            'concat_news': self.concat_news,
        }

    def _check_width(self, batch: BatchedGraph):
        width = batch.features.shape[1]
        if width != self.input_dim:
            raise DimMismatch(
                f'{self.kind}: las features tienen {width} columnas, el modelo espera {self.input_dim}'
            )

    def forward(self, batch: BatchedGraph) -> np.ndarray:
        logits = check_finite(self.logits(batch), f'logits de {self.kind}')
        return softmax_rows(logits)

    def logits(self, batch: BatchedGraph) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad_logits: np.ndarray):
        raise NotImplementedError

    def predict_proba(self, batch: BatchedGraph) -> np.ndarray:
        return self.forward(batch)

    def loss(self, batch: BatchedGraph) -> float:
        """Entropía cruzada media del batch en el modo actual."""
        probs = self.forward(batch)
        self._loss_cache = (probs, batch.labels)
        return cross_entropy(probs, batch.labels)

    def loss_backward(self):
        """Propaga el gradiente de la última loss() hasta todos los parámetros."""
        if self._loss_cache is None:
            raise NoForwardPass('loss_backward() sin loss() previo')
        probs, labels = self._loss_cache
        self._loss_cache = None
        self.backward(softmax_cross_entropy_grad(probs, labels))


class BetterGNNModel(GraphClassifier):
    """
    GIN de una capa con readout por atención sobre features aumentadas.

    Args:
        input_dim: feat_dim + 2 (features crudas + centralidad + clustering)
        hidden_dim: Ancho oculto
        dropout_rate: Tasa de dropout de la cabeza
        seed: Semilla de inicialización y de dropout
    """

    kind = 'better_gnn'

    def __init__(self, input_dim: int, hidden_dim: int = 128, dropout_rate: float = 0.5, seed: int = 0):
        super().__init__(input_dim, hidden_dim, dropout_rate, seed, concat_news=False)
        init_seed, dropout_seed = np.random.SeedSequence(seed).spawn(2)
        rng = np.random.default_rng(init_seed)

        self.gin = GINConv(input_dim, hidden_dim, rng)
        self.gin_act = ReLU()
        self.pool = AttentionPool(hidden_dim, rng)
        self.fc1 = Linear(hidden_dim, hidden_dim, rng)
        self.norm = BatchNorm(hidden_dim)
        self.head_act = ReLU()
        self.dropout = Dropout(dropout_rate, dropout_seed)
        self.fc2 = Linear(hidden_dim, NUM_CLASSES, rng)

    def logits(self, batch: BatchedGraph) -> np.ndarray:
        self._check_width(batch)
        h = self.gin_act.forward(self.gin.forward(batch.features, batch.edges))
        z = self.pool.forward(h, batch.membership, batch.num_graphs)
        z = self.head_act.forward(self.norm.forward(self.fc1.forward(z)))
        return self.fc2.forward(self.dropout.forward(z))

    def backward(self, grad_logits: np.ndarray):
        g = self.dropout.backward(self.fc2.backward(grad_logits))
        g = self.fc1.backward(self.norm.backward(self.head_act.backward(g)))
        g = self.gin_act.backward(self.pool.backward(g))
        self.gin.backward(g)

    def attention_weights(self, batch: Optional[BatchedGraph] = None) -> np.ndarray:
        """
        Pesos α del readout por nodo. Si se pasa un batch se corre forward primero.

        Raises:
            NoForwardPass: Si no hubo forward previo y no se pasó batch
        """
        if batch is not None:
            self.forward(batch)
        if self.pool.last_alpha is None:
            raise NoForwardPass('attention_weights() sin forward previo')
        return self.pool.last_alpha.copy()


class BaselineModel(GraphClassifier):
    """
    Una convolución (GCN, SAGE o GAT), ReLU, global max pooling y una capa lineal a 2 clases.

    Con concat_news se concatena el vector de features crudo de la raíz (la noticia)
    al embedding del grafo antes de la capa lineal.
    """

    def __init__(
        self,
        encoder_kind: str,
        input_dim: int,
        hidden_dim: int = 128,
        seed: int = 0,
        concat_news: bool = False,
    ):
        if encoder_kind not in BASELINE_CONVS:
            raise UsageError(f'Baseline desconocido: {encoder_kind!r} (opciones: {tuple(BASELINE_CONVS)})')
        super().__init__(input_dim, hidden_dim, 0.0, seed, concat_news)
        self.kind = encoder_kind
        rng = np.random.default_rng(np.random.SeedSequence(seed))

        self.conv = BASELINE_CONVS[encoder_kind](input_dim, hidden_dim, rng)
        self.conv_act = ReLU()
        self.pool = GlobalMaxPool()
        self.head = Linear(self.head_input_dim, NUM_CLASSES, rng)

    @property
    def head_input_dim(self) -> int:
        return self.hidden_dim + (self.input_dim if self.concat_news else 0)

    def logits(self, batch: BatchedGraph) -> np.ndarray:
        self._check_width(batch)
        h = self.conv_act.forward(self.conv.forward(batch.features, batch.edges))
        z = self.pool.forward(h, batch.membership, batch.num_graphs)
        if self.concat_news:
            z = np.hstack([z, batch.features[batch.roots]])
        return self.head.forward(z)

    def backward(self, grad_logits: np.ndarray):
        g = self.head.backward(grad_logits)[:, :self.hidden_dim]
        self.conv.backward(self.conv_act.backward(self.pool.backward(g)))


def build_model(
    kind: str,
    input_dim: int,
    hidden_dim: int = 128,
    dropout_rate: float = 0.5,
    seed: int = 0,
    concat_news: bool = False,
) -> GraphClassifier:
    """
    Construye un modelo por su tipo.

    Args:
        kind: 'better_gnn', 'gcn', 'sage' o 'gat'
        input_dim: Ancho de features que recibirá el modelo
        hidden_dim: Ancho oculto
        dropout_rate: Solo BetterGNN
        seed: Semilla de inicialización
        concat_news: Solo baselines

    Returns:
        Modelo inicializado en modo train
    """
    if kind == BetterGNNModel.kind:
        return BetterGNNModel(input_dim, hidden_dim, dropout_rate, seed)
    return BaselineModel(kind, input_dim, hidden_dim, seed, concat_news)


# ========== Checkpoints ==========

@dataclass
class Checkpoint:
    """
    Estado completo de un modelo en una época dada.

    Attributes:
        model: Modelo (parámetros, momentos de Adam, estadísticas de batchnorm, RNG de dropout)
        epoch: Época al final de la cual se tomó (0 = sin entrenar)
        metrics: Métricas de validación de esa época
        train_state: Estado del loop (RNG de shuffle, log de épocas, mejor F1)
    """
    model: GraphClassifier
    epoch: int = 0
    metrics: Dict[str, float] = field(default_factory=dict)
    train_state: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def snapshot(cls, model: GraphClassifier, **kwargs) -> 'Checkpoint':
        """Copia profunda del modelo: el checkpoint no cambia si el modelo sigue entrenando."""
        return cls(model=copy.deepcopy(model), **kwargs)


def save_checkpoint(checkpoint: Checkpoint, path: str):
    """
    Guarda un checkpoint como archivo .npz con una entrada JSON de metadatos.

    Entradas: param:<nombre>, adam_m:<nombre>, adam_v:<nombre>, buffer:<nombre>, __meta__.
    """
    model = checkpoint.model
    arrays: Dict[str, np.ndarray] = {}
    step_counts: Dict[str, int] = {}

    for name, p in model.named_parameters():
        arrays[f'param:{name}'] = p.value
        arrays[f'adam_m:{name}'] = p.m
        arrays[f'adam_v:{name}'] = p.v
        step_counts[name] = p.step_count

    for name, buffer in model.named_buffers():
        arrays[f'buffer:{name}'] = buffer

    meta = {
        'format': CHECKPOINT_FORMAT,
        'version': CHECKPOINT_VERSION,
        'model': model.hyperparameters(),
        'step_counts': step_counts,
        'rngs': {name: rng.bit_generator.state for name, rng in model.named_rngs()},
        'epoch': checkpoint.epoch,
        'metrics': checkpoint.metrics,
        'train_state': checkpoint.train_state,
    }
    arrays['__meta__'] = np.array(json.dumps(meta))

    with open(path, 'wb') as f:
        np.savez(f, **arrays)
    logger.info(f'Checkpoint guardado: {path} (época {checkpoint.epoch}, modelo {model.kind})')


def load_checkpoint(path: str) -> Checkpoint:
    """
    Carga un checkpoint guardado con save_checkpoint; la reconstrucción es exacta.

    Raises:
        ValidationFailed: Si el archivo no es un checkpoint válido o no coincide con la arquitectura
    """
    try:
        with np.load(path, allow_pickle=False) as data:
            arrays = {key: data[key] for key in data.files}
    except (OSError, ValueError) as e:
        raise ValidationFailed(f'No se pudo leer el checkpoint {path}: {e}') from e

    if '__meta__' not in arrays:
        raise ValidationFailed(f'{path} no contiene metadatos de checkpoint')
    meta = json.loads(str(arrays['__meta__']))
    if meta.get('format') != CHECKPOINT_FORMAT:
        raise ValidationFailed(f'{path} no es un checkpoint de BetterGNN')

    hp = meta['model']
    model = build_model(
        hp['kind'], hp['input_dim'], hp['hidden_dim'], hp['dropout_rate'], hp['seed'], hp['concat_news']
    )

    try:
        for name, p in model.named_parameters():
            np.copyto(p.value, arrays[f'param:{name}'])
            np.copyto(p.m, arrays[f'adam_m:{name}'])
            np.copyto(p.v, arrays[f'adam_v:{name}'])
            p.step_count = int(meta['step_counts'][name])
        for name, buffer in model.named_buffers():
            np.copyto(buffer, arrays[f'buffer:{name}'])
        for name, rng in model.named_rngs():
            rng.bit_generator.state = meta['rngs'][name]
    except (KeyError, ValueError, ModelError) as e:
        raise ValidationFailed(f'Checkpoint {path} incompatible con la arquitectura {hp["kind"]}: {e}') from e

    return Checkpoint(
        model=model,
        epoch=int(meta['epoch']),
        metrics=meta.get('metrics', {}),
        train_state=meta.get('train_state', {}),
    )
