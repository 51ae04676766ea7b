"""
NN Core
Álgebra densa, capas con forward/backward, pérdida y verificación de gradientes.

Cada capa es un Module: forward() guarda lo necesario y backward() recibe el gradiente
de la salida, acumula gradientes en sus Parameter y retorna el gradiente de la entrada.
Todo se calcula en float64.
"""
import logging
from dataclasses import dataclass
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from errors import (
    CheckFailed,
    EmptyGraphInBatch,
    LabelOutOfRange,
    NoForwardPass,
    NonFiniteTensor,
    RateOutOfRange,
    ShapeMismatch,
    SingleRowTrainBatch,
)


logger = logging.getLogger(__name__)

Tensor2D = np.ndarray

GAT_NEGATIVE_SLOPE = 0.2
PROB_FLOOR = 1e-15


def check_finite(x: np.ndarray, where: str) -> np.ndarray:
    """Lanza NonFiniteTensor si x contiene NaN o Inf."""
    if not np.all(np.isfinite(x)):
        raise NonFiniteTensor(f'Valores no finitos en {where}')
    return x


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class Parameter:
    """
    Parámetro entrenable con su gradiente y los momentos de Adam.

    Attributes:
        value: Valor actual
        grad: Gradiente acumulado desde el último zero_grad()
        m, v: Primer y segundo momento de Adam
        step_count: Pasos de Adam aplicados
        decay: Si recibe weight decay (False para biases y parámetros de batchnorm)
    """

    def __init__(self, value: np.ndarray, decay: bool = True):
        self.value = np.array(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)
        self.m = np.zeros_like(self.value)
        self.v = np.zeros_like(self.value)
        self.step_count = 0
        self.decay = decay
        self.has_grad = False

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    @property
    def size(self) -> int:
        return int(self.value.size)

    def accumulate(self, grad: np.ndarray):
        if grad.shape != self.value.shape:
            raise ShapeMismatch(f'Gradiente {grad.shape} no coincide con el parámetro {self.value.shape}')
        self.grad += grad
        self.has_grad = True

    def zero_grad(self):
        self.grad.fill(0.0)
        self.has_grad = False

    def __repr__(self) -> str:
        return f'Parameter(shape={self.shape}, decay={self.decay}, step={self.step_count})'


class Module:
    """
    Clase base de las capas.

    Los parámetros, buffers y generadores aleatorios se descubren recorriendo los
    atributos en orden de creación, así los nombres son estables entre instancias.
    """

    _buffer_names: Tuple[str, ...] = ()
    _rng_names: Tuple[str, ...] = ()

    def __init__(self):
        self.training = True

    def _submodules(self) -> Iterator[Tuple[str, 'Module']]:
        for name, value in vars(self).items():
            if isinstance(value, Module):
                yield name, value
            elif isinstance(value, (list, tuple)):
                for index, item in enumerate(value):
                    if isinstance(item, Module):
                        yield f'{name}.{index}', item

    def walk(self, prefix: str = '') -> Iterator[Tuple[str, 'Module']]:
        """Recorre este módulo y todos sus submódulos con su prefijo."""
        yield prefix, self
        for name, child in self._submodules():
            yield from child.walk(f'{prefix}{name}.')

    def named_parameters(self) -> List[Tuple[str, Parameter]]:
        named = []
        for prefix, module in self.walk():
            for name, value in vars(module).items():
                if isinstance(value, Parameter):
                    named.append((f'{prefix}{name}', value))
        return named

    def parameters(self) -> List[Parameter]:
        return [p for _, p in self.named_parameters()]

    def named_buffers(self) -> List[Tuple[str, np.ndarray]]:
        return [
            (f'{prefix}{name}', getattr(module, name))
            for prefix, module in self.walk()
            for name in module._buffer_names
        ]

    def named_rngs(self) -> List[Tuple[str, np.random.Generator]]:
        return [
            (f'{prefix}{name}', getattr(module, name))
            for prefix, module in self.walk()
            for name in module._rng_names
        ]

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def train(self):
        for _, module in self.walk():
            module.training = True

    def eval(self):
        for _, module in self.walk():
            module.training = False

    def _require(self, cache: Any) -> Any:
        if cache is None:
            raise NoForwardPass(f'{type(self).__name__}: backward() sin forward() previo')
        return cache


# ========== Capas densas ==========

class Linear(Module):
    """Capa afín x @ W + b con inicialización Glorot uniforme."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator, bias: bool = True):
        super().__init__()
        self.weight = Parameter(glorot_uniform(rng, in_dim, out_dim))
        self.bias = Parameter(np.zeros((1, out_dim)), decay=False) if bias else None
        self._x: Optional[np.ndarray] = None

    @property
    def in_dim(self) -> int:
        return self.weight.shape[0]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[1]

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.shape[1] != self.in_dim:
            raise ShapeMismatch(f'Linear espera {self.in_dim} columnas, recibió {x.shape[1]}')
        self._x = x
        out = x @ self.weight.value
        if self.bias is not None:
            out = out + self.bias.value
        return out

    def backward(self, grad: np.ndarray) -> np.ndarray:
        x = self._require(self._x)
        self.weight.accumulate(x.T @ grad)
        if self.bias is not None:
            self.bias.accumulate(grad.sum(axis=0, keepdims=True))
        self._x = None
        return grad @ self.weight.value.T


class ReLU(Module):

    def __init__(self):
        super().__init__()
        self._mask: Optional[np.ndarray] = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        mask = self._require(self._mask)
        self._mask = None
        return np.where(mask, grad, 0.0)


class MLP(Module):
    """
    Perceptrón multicapa: Linear, ReLU entre capas y sin activación al final.

    Args:
        dims: Dimensiones encadenadas [in, h1, ..., out] (al menos dos)
        rng: Generador para la inicialización
    """

    def __init__(self, dims: Sequence[int], rng: np.random.Generator):
        super().__init__()
        if len(dims) < 2:
            raise ShapeMismatch('Un MLP necesita al menos una capa')
        self.layers: List[Module] = []
        for index, (d_in, d_out) in enumerate(zip(dims[:-1], dims[1:])):
            if index > 0:
                self.layers.append(ReLU())
            self.layers.append(Linear(d_in, d_out, rng))

    def forward(self, x: np.ndarray) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, grad: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad


class BatchNorm(Module):
    """
    Normalización por batch sobre filas.

    En train normaliza con media y varianza sesgada del batch y actualiza las
    estadísticas móviles (la varianza móvil usa el estimador insesgado).
    En eval usa las estadísticas móviles.
    """

    _buffer_names = ('running_mean', 'running_var')

    def __init__(self, num_features: int, momentum: float = 0.1, epsilon: float = 1e-5):
        super().__init__()
        self.gamma = Parameter(np.ones((1, num_features)), decay=False)
        self.beta = Parameter(np.zeros((1, num_features)), decay=False)
        self.running_mean = np.zeros(num_features)
        self.running_var = np.ones(num_features)
        self.momentum = momentum
        self.epsilon = epsilon
        self._cache: Optional[Tuple[np.ndarray, np.ndarray, bool]] = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.shape[1] != self.gamma.shape[1]:
            raise ShapeMismatch(f'BatchNorm espera {self.gamma.shape[1]} columnas, recibió {x.shape[1]}')

        if self.training:
            n = x.shape[0]
            if n < 2:
                raise SingleRowTrainBatch('BatchNorm en modo train necesita al menos 2 filas')
            mean = x.mean(axis=0)
            var = x.var(axis=0)
            self.running_mean *= 1.0 - self.momentum
            self.running_mean += self.momentum * mean
            self.running_var *= 1.0 - self.momentum
            self.running_var += self.momentum * var * n / (n - 1)
        else:
            mean = self.running_mean
            var = self.running_var

        inv_std = 1.0 / np.sqrt(var + self.epsilon)
        x_hat = (x - mean) * inv_std
        self._cache = (x_hat, inv_std, self.training)
        return self.gamma.value * x_hat + self.beta.value

    def backward(self, grad: np.ndarray) -> np.ndarray:
        x_hat, inv_std, training = self._require(self._cache)
        self._cache = None
        self.gamma.accumulate((grad * x_hat).sum(axis=0, keepdims=True))
        self.beta.accumulate(grad.sum(axis=0, keepdims=True))

        g_hat = grad * self.gamma.value
        if not training:
            return g_hat * inv_std

        n = grad.shape[0]
        return (inv_std / n) * (
            n * g_hat - g_hat.sum(axis=0) - x_hat * (g_hat * x_hat).sum(axis=0)
        )


class Dropout(Module):
    """
    Dropout invertido: en train anula cada entrada con probabilidad rate y escala
    las sobrevivientes por 1 / (1 - rate). En eval es la identidad.
    """

    _rng_names = ('rng',)

    def __init__(self, rate: float, seed: int = 0):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise RateOutOfRange(f'La tasa de dropout debe estar en [0, 1) (recibido {rate})')
        self.rate = rate
        self.rng = np.random.default_rng(seed)
        self._mask: Optional[np.ndarray] = None
        self._called = False

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._called = True
        if not self.training or self.rate == 0.0:
            self._mask = None
            return x
        self._mask = (self.rng.random(x.shape) >= self.rate) / (1.0 - self.rate)
        return x * self._mask

    def backward(self, grad: np.ndarray) -> np.ndarray:
        if not self._called:
            raise NoForwardPass('Dropout: backward() sin forward() previo')
        self._called = False
        mask, self._mask = self._mask, None
        return grad if mask is None else grad * mask


# ========== Agregación sobre aristas ==========

def message_index(edges: np.ndarray, num_nodes: int, self_loops: bool = False) -> Tuple[np.ndarray, np.ndarray]:
    """
    Pares (origen, destino) en ambas orientaciones para aristas no dirigidas.

    Args:
        edges: Array (m, 2)
        num_nodes: Cantidad de nodos
        self_loops: Agregar (v, v) para cada nodo

    Returns:
        Tupla (src, dst)
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    src = [edges[:, 0], edges[:, 1]]
    dst = [edges[:, 1], edges[:, 0]]
    if self_loops:
        loops = np.arange(num_nodes, dtype=np.int64)
        src.append(loops)
        dst.append(loops)
    return np.concatenate(src), np.concatenate(dst)


def scatter_rows(values: np.ndarray, index: np.ndarray, num_rows: int) -> np.ndarray:
    """Suma filas de values en las posiciones index."""
    out = np.zeros((num_rows, values.shape[1]))
    np.add.at(out, index, values)
    return out


def node_degrees(edges: np.ndarray, num_nodes: int) -> np.ndarray:
    return np.bincount(np.asarray(edges, dtype=np.int64).reshape(-1), minlength=num_nodes)


def segment_softmax(scores: np.ndarray, segments: np.ndarray, num_segments: int) -> np.ndarray:
    """Softmax de scores dentro de cada segmento (numéricamente estable)."""
    maxima = np.full(num_segments, -np.inf)
    np.maximum.at(maxima, segments, scores)
    exp = np.exp(scores - maxima[segments])
    totals = np.bincount(segments, weights=exp, minlength=num_segments)
    return exp / totals[segments]


def segment_softmax_backward(
    alpha: np.ndarray, grad_alpha: np.ndarray, segments: np.ndarray, num_segments: int
) -> np.ndarray:
    weighted = np.bincount(segments, weights=alpha * grad_alpha, minlength=num_segments)
    return alpha * (grad_alpha - weighted[segments])


def _check_matrix(x: np.ndarray, layer: str):
    if x.ndim != 2:
        raise ShapeMismatch(f'{layer}: X debe ser una matriz, tiene forma {x.shape}')


def _check_edges(edges: np.ndarray, num_nodes: int, layer: str):
    if edges.size and (edges.min() < 0 or edges.max() >= num_nodes):
        raise ShapeMismatch(f'{layer}: aristas fuera de rango para {num_nodes} nodos')


# ========== Convoluciones ==========

class GINConv(Module):
    """
    GIN: MLP((1 + eps) · x_v + Σ_{u ∈ N(v)} x_u) con eps fijo (no entrenable).

    El MLP interno tiene dos capas con ancho oculto = ancho de salida.
    """

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator, eps: float = 0.0):
        super().__init__()
        self.eps = eps
        self.mlp = MLP([in_dim, out_dim, out_dim], rng)
        self._index: Optional[Tuple[np.ndarray, np.ndarray]] = None

    def forward(self, x: np.ndarray, edges: np.ndarray) -> np.ndarray:
        n = x.shape[0]
        _check_edges(np.asarray(edges), n, 'GINConv')
        src, dst = message_index(edges, n)
        self._index = (src, dst)
        aggregated = (1.0 + self.eps) * x + scatter_rows(x[src], dst, n)
        return self.mlp.forward(aggregated)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        src, dst = self._require(self._index)
        self._index = None
        g_agg = self.mlp.backward(grad)
        return (1.0 + self.eps) * g_agg + scatter_rows(g_agg[dst], src, g_agg.shape[0])


class GCNConv(Module):
    """GCN con self-loops y normalización simétrica 1/√((deg(v)+1)(deg(u)+1)); sin bias."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator):
        super().__init__()
        self.weight = Parameter(glorot_uniform(rng, in_dim, out_dim))
        self._cache = None

    def forward(self, x: np.ndarray, edges: np.ndarray) -> np.ndarray:
        out, self._cache = _gcn_forward(x, edges, self.weight.value)
        return out

    def backward(self, grad: np.ndarray) -> np.ndarray:
        x, src, dst, coef = self._require(self._cache)
        self._cache = None
        g_y = scatter_rows(coef[:, None] * grad[dst], src, x.shape[0])
        self.weight.accumulate(x.T @ g_y)
        return g_y @ self.weight.value.T


def _gcn_forward(x: np.ndarray, edges: np.ndarray, weight: np.ndarray):
    n = x.shape[0]
    if x.shape[1] != weight.shape[0]:
        raise ShapeMismatch(f'GCNConv: X tiene {x.shape[1]} columnas, W espera {weight.shape[0]}')
    _check_edges(np.asarray(edges), n, 'GCNConv')
    degrees = node_degrees(edges, n)
    src, dst = message_index(edges, n, self_loops=True)
    coef = 1.0 / np.sqrt((degrees[dst] + 1.0) * (degrees[src] + 1.0))
    y = x @ weight
    return scatter_rows(coef[:, None] * y[src], dst, n), (x, src, dst, coef)


class SAGEConv(Module):
    """GraphSAGE con agregador media: x_v W_self + mean_{u ∈ N(v)}(x_u) W_neigh; sin bias."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator):
        super().__init__()
        self.weight_self = Parameter(glorot_uniform(rng, in_dim, out_dim))
        self.weight_neigh = Parameter(glorot_uniform(rng, in_dim, out_dim))
        self._cache = None

    def forward(self, x: np.ndarray, edges: np.ndarray) -> np.ndarray:
        out, self._cache = _sage_forward(x, edges, self.weight_self.value, self.weight_neigh.value)
        return out

    def backward(self, grad: np.ndarray) -> np.ndarray:
        x, mean, src, dst, scale = self._require(self._cache)
        self._cache = None
        self.weight_self.accumulate(x.T @ grad)
        self.weight_neigh.accumulate(mean.T @ grad)
        g_mean = (grad @ self.weight_neigh.value.T) * scale[:, None]
        return grad @ self.weight_self.value.T + scatter_rows(g_mean[dst], src, x.shape[0])


def _sage_forward(x: np.ndarray, edges: np.ndarray, weight_self: np.ndarray, weight_neigh: np.ndarray):
    n = x.shape[0]
    if x.shape[1] != weight_self.shape[0] or weight_self.shape != weight_neigh.shape:
        raise ShapeMismatch('SAGEConv: formas de X, W_self y W_neigh no encadenan')
    _check_edges(np.asarray(edges), n, 'SAGEConv')
    src, dst = message_index(edges, n)
    # vecindario vacío -> media cero
    scale = 1.0 / np.maximum(node_degrees(edges, n), 1)
    mean = scatter_rows(x[src], dst, n) * scale[:, None]
    return x @ weight_self + mean @ weight_neigh, (x, mean, src, dst, scale)


class GATConv(Module):
    """
    GAT de una cabeza con atención aditiva sobre N(v) ∪ {v}.

    e_vu = LeakyReLU(a_dst · h_v + a_src · h_u) con pendiente 0.2, softmax por destino.
    attn tiene forma (2, out_dim): fila 0 = a_src, fila 1 = a_dst.
    """

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator):
        super().__init__()
        self.weight = Parameter(glorot_uniform(rng, in_dim, out_dim))
        self.attn = Parameter(glorot_uniform(rng, 2, out_dim))
        self._cache = None

    def forward(self, x: np.ndarray, edges: np.ndarray) -> np.ndarray:
        out, self._cache = _gat_forward(x, edges, self.weight.value, self.attn.value)
        return out

    def backward(self, grad: np.ndarray) -> np.ndarray:
        x, h, src, dst, raw, alpha = self._require(self._cache)
        self._cache = None
        n = x.shape[0]
        a_src, a_dst = self.attn.value[0], self.attn.value[1]

        g_h = scatter_rows(alpha[:, None] * grad[dst], src, n)
        g_alpha = np.einsum('ij,ij->i', grad[dst], h[src])
        g_e = segment_softmax_backward(alpha, g_alpha, dst, n)
        g_raw = g_e * np.where(raw > 0, 1.0, GAT_NEGATIVE_SLOPE)

        g_s_src = np.bincount(src, weights=g_raw, minlength=n)
        g_s_dst = np.bincount(dst, weights=g_raw, minlength=n)
        self.attn.accumulate(np.vstack([h.T @ g_s_src, h.T @ g_s_dst]))
        g_h += np.outer(g_s_src, a_src) + np.outer(g_s_dst, a_dst)

        self.weight.accumulate(x.T @ g_h)
        return g_h @ self.weight.value.T


def _gat_forward(x: np.ndarray, edges: np.ndarray, weight: np.ndarray, attn: np.ndarray):
    n = x.shape[0]
    if x.shape[1] != weight.shape[0] or attn.shape != (2, weight.shape[1]):
        raise ShapeMismatch('GATConv: formas de X, W y attn no encadenan')
    _check_edges(np.asarray(edges), n, 'GATConv')
    src, dst = message_index(edges, n, self_loops=True)
    h = x @ weight
    raw = (h @ attn[1])[dst] + (h @ attn[0])[src]
    scores = np.where(raw > 0, raw, GAT_NEGATIVE_SLOPE * raw)
    alpha = segment_softmax(scores, dst, n)
    out = scatter_rows(alpha[:, None] * h[src], dst, n)
    return out, (x, h, src, dst, raw, alpha)


# ========== Pooling ==========

def _graph_slices(membership: np.ndarray, num_graphs: Optional[int]) -> Tuple[int, np.ndarray]:
    membership = np.asarray(membership, dtype=np.int64)
    if num_graphs is None:
        num_graphs = int(membership.max()) + 1 if membership.size else 0
    counts = np.bincount(membership, minlength=num_graphs)
    if counts.shape[0] != num_graphs or np.any(counts == 0):
        raise EmptyGraphInBatch('Hay un grafo sin nodos en el batch')
    if np.any(np.diff(membership) < 0):
        raise ShapeMismatch('membership debe ser no decreciente (bloques contiguos)')
    return num_graphs, np.concatenate([[0], np.cumsum(counts)])


class AttentionPool(Module):
    """
    Readout por atención global: α = softmax por grafo de h_i · w, z_g = Σ α_i h_i.

    La compuerta es un mapa lineal hidden -> 1 sin bias: un desplazamiento constante
    se cancela en el softmax dentro de cada grafo.
    """

    def __init__(self, hidden_dim: int, rng: np.random.Generator):
        super().__init__()
        self.gate = Parameter(glorot_uniform(rng, hidden_dim, 1))
        self.last_alpha: Optional[np.ndarray] = None
        self._cache = None

    def forward(self, h: np.ndarray, membership: np.ndarray, num_graphs: Optional[int] = None) -> np.ndarray:
        if membership.shape[0] != h.shape[0]:
            raise ShapeMismatch(f'membership tiene {membership.shape[0]} entradas, H tiene {h.shape[0]} filas')
        num_graphs, _ = _graph_slices(membership, num_graphs)
        z, alpha = _attention_forward(h, membership, self.gate.value, num_graphs)
        self.last_alpha = alpha
        self._cache = (h, membership, alpha, num_graphs)
        return z

    def backward(self, grad: np.ndarray) -> np.ndarray:
        h, membership, alpha, num_graphs = self._require(self._cache)
        self._cache = None
        g_rows = grad[membership]
        g_h = alpha[:, None] * g_rows
        g_alpha = np.einsum('ij,ij->i', g_rows, h)
        g_s = segment_softmax_backward(alpha, g_alpha, membership, num_graphs)
        self.gate.accumulate(h.T @ g_s[:, None])
        return g_h + np.outer(g_s, self.gate.value[:, 0])


def _attention_forward(h: np.ndarray, membership: np.ndarray, gate: np.ndarray, num_graphs: int):
    scores = (h @ gate)[:, 0]
    alpha = segment_softmax(scores, membership, num_graphs)
    return scatter_rows(alpha[:, None] * h, membership, num_graphs), alpha


class GlobalMaxPool(Module):
    """Máximo por columna dentro de cada grafo; el gradiente va a la primera fila máxima."""

    def __init__(self):
        super().__init__()
        self._cache = None

    def forward(self, h: np.ndarray, membership: np.ndarray, num_graphs: Optional[int] = None) -> np.ndarray:
        if membership.shape[0] != h.shape[0]:
            raise ShapeMismatch(f'membership tiene {membership.shape[0]} entradas, H tiene {h.shape[0]} filas')
        num_graphs, offsets = _graph_slices(membership, num_graphs)
        winners = np.empty((num_graphs, h.shape[1]), dtype=np.int64)
        for g in range(num_graphs):
            start, stop = offsets[g], offsets[g + 1]
            winners[g] = start + np.argmax(h[start:stop], axis=0)
        self._cache = (h.shape, winners)
        return np.take_along_axis(h, winners, axis=0)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        shape, winners = self._require(self._cache)
        self._cache = None
        g_h = np.zeros(shape)
        columns = np.broadcast_to(np.arange(shape[1]), winners.shape)
        np.add.at(g_h, (winners, columns), grad)
        return g_h


# ========== Formas funcionales ==========

def gin_conv(x: np.ndarray, edges: np.ndarray, eps: float, mlp: MLP) -> np.ndarray:
    """Fila v = MLP((1 + eps)·X[v] + Σ_{u ∈ N(v)} X[u])."""
    _check_matrix(x, 'gin_conv')
    n = x.shape[0]
    _check_edges(np.asarray(edges), n, 'gin_conv')
    src, dst = message_index(edges, n)
    return mlp.forward((1.0 + eps) * x + scatter_rows(x[src], dst, n))


def gcn_conv(x: np.ndarray, edges: np.ndarray, weight: np.ndarray) -> np.ndarray:
    return _gcn_forward(x, edges, weight)[0]


def sage_conv(x: np.ndarray, edges: np.ndarray, weight_self: np.ndarray, weight_neigh: np.ndarray) -> np.ndarray:
    return _sage_forward(x, edges, weight_self, weight_neigh)[0]


def gat_conv(x: np.ndarray, edges: np.ndarray, weight: np.ndarray, attn: np.ndarray) -> np.ndarray:
    return _gat_forward(x, edges, weight, attn)[0]


def attention_pool(
    h: np.ndarray, membership: np.ndarray, gate: np.ndarray, num_graphs: Optional[int] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Readout por atención.

    Returns:
        Tupla (Z de forma num_graphs × hidden, α por nodo)

    Raises:
        EmptyGraphInBatch: Si algún grafo del batch no tiene nodos
    """
    if membership.shape[0] != h.shape[0]:
        raise ShapeMismatch(f'membership tiene {membership.shape[0]} entradas, H tiene {h.shape[0]} filas')
    num_graphs, _ = _graph_slices(membership, num_graphs)
    return _attention_forward(h, membership, np.asarray(gate).reshape(-1, 1), num_graphs)


def global_max_pool(h: np.ndarray, membership: np.ndarray, num_graphs: Optional[int] = None) -> np.ndarray:
    return GlobalMaxPool().forward(h, membership, num_graphs)


def batchnorm(x: np.ndarray, state: BatchNorm) -> np.ndarray:
    """Aplica batch normalization con el estado (y modo) dado."""
    return state.forward(x)


def dropout(x: np.ndarray, rate: float, seed: int, training: bool = True) -> np.ndarray:
    """Dropout determinístico para una semilla fija."""
    layer = Dropout(rate, seed)
    layer.training = training
    return layer.forward(x)


def softmax_rows(x: np.ndarray) -> np.ndarray:
    """Softmax por fila restando el máximo de cada fila."""
    shifted = x - x.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def _check_labels(labels: np.ndarray, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise LabelOutOfRange(f'Etiquetas fuera de [0, {num_classes}): {np.unique(labels).tolist()}')
    return labels


def cross_entropy(probs: np.ndarray, labels: np.ndarray) -> float:
    """
    Media sobre filas de -ln(probabilidad de la clase verdadera), acotada por ln(1e-15).

    Raises:
        LabelOutOfRange: Si alguna etiqueta no es una columna válida
    """
    labels = _check_labels(labels, probs.shape[1])
    picked = probs[np.arange(labels.shape[0]), labels]
    return float(np.mean(-np.log(np.maximum(picked, PROB_FLOOR))))


def softmax_cross_entropy_grad(probs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Gradiente de la pérdida media respecto de los logits: (P - onehot) / N."""
    labels = _check_labels(labels, probs.shape[1])
    grad = probs.copy()
    grad[np.arange(labels.shape[0]), labels] -= 1.0
    return grad / labels.shape[0]


# ========== Verificación de gradientes ==========

@dataclass
class GradCheckReport:
    """Resultado de comparar gradientes analíticos y por diferencias finitas."""
    num_checked: int
    max_relative_error: float
    worst_parameter: Optional[str]
    worst_index: Optional[Tuple[int, ...]]
    worst_analytic: float
    worst_numeric: float
    epsilon: float
    tolerance: float
    passed: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            'num_checked': self.num_checked,
            'max_relative_error': self.max_relative_error,
            'worst_parameter': self.worst_parameter,
            'worst_index': list(self.worst_index) if self.worst_index is not None else None,
            'worst_analytic': self.worst_analytic,
            'worst_numeric': self.worst_numeric,
            'epsilon': self.epsilon,
            'tolerance': self.tolerance,
            'passed': self.passed,
        }


def compute_analytic_gradients(model: Any, batch: Any) -> Tuple[float, List[np.ndarray]]:
    """
    Corre forward + backward en modo eval y retorna (pérdida, copias de los gradientes).

    El modelo debe exponer eval(), zero_grad(), loss(batch), loss_backward() y named_parameters().
    """
    model.eval()
    model.zero_grad()
    loss = model.loss(batch)
    model.loss_backward()
    return loss, [p.grad.copy() for _, p in model.named_parameters()]


def compare_gradients(
    model: Any,
    batch: Any,
    analytic: Sequence[np.ndarray],
    epsilon: float = 1e-5,
    tolerance: float = 1e-4,
    num_samples: int = 100,
    seed: int = 0,
) -> GradCheckReport:
    """
    Compara gradientes analíticos contra diferencias centrales en coordenadas al azar.

    error relativo = |a - n| / max(|a|, |n|, 1e-8)

    Raises:
        CheckFailed: Si alguna coordenada supera la tolerancia
    """
    named = model.named_parameters()
    sizes = np.array([p.size for _, p in named], dtype=np.int64)
    total = int(sizes.sum()) if sizes.size else 0

    if total == 0:
        logger.info('Modelo sin parámetros: chequeo de gradientes vacío')
        return GradCheckReport(0, 0.0, None, None, 0.0, 0.0, epsilon, tolerance, True)

    rng = np.random.default_rng(seed)
    if total <= num_samples:
        coordinates = np.arange(total)
    else:
        coordinates = np.sort(rng.choice(total, size=num_samples, replace=False))
    bounds = np.cumsum(sizes)

    model.eval()
    worst = (-1.0, None, None, 0.0, 0.0)
    for coordinate in coordinates.tolist():
        which = int(np.searchsorted(bounds, coordinate, side='right'))
        local = coordinate - (int(bounds[which - 1]) if which else 0)
        name, param = named[which]
        flat = param.value.reshape(-1)
        original = flat[local]

        flat[local] = original + epsilon
        loss_plus = model.loss(batch)
        flat[local] = original - epsilon
        loss_minus = model.loss(batch)
        flat[local] = original

        numeric = (loss_plus - loss_minus) / (2.0 * epsilon)
        exact = float(analytic[which].reshape(-1)[local])
        error = abs(exact - numeric) / max(abs(exact), abs(numeric), 1e-8)
        if error > worst[0]:
            worst = (error, name, np.unravel_index(local, param.shape), exact, numeric)

    error, name, index, exact, numeric = worst
    report = GradCheckReport(
        num_checked=len(coordinates),
        max_relative_error=float(error),
        worst_parameter=name,
        worst_index=tuple(int(i) for i in index),
        worst_analytic=exact,
        worst_numeric=float(numeric),
        epsilon=epsilon,
        tolerance=tolerance,
        passed=error < tolerance,
    )

    if not report.passed:
        raise CheckFailed(
            f'Chequeo de gradientes fallido en {name}{list(report.worst_index)}: '
            f'analítico={exact:.6e}, numérico={numeric:.6e}, error relativo={error:.3e}',
            report,
        )

    logger.info(
        f'Chequeo de gradientes OK: {report.num_checked} coordenadas, '
        f'error relativo máximo {report.max_relative_error:.3e}'
    )
    return report


def grad_check(
    model: Any,
    batch: Any,
    epsilon: float = 1e-5,
    tolerance: float = 1e-4,
    num_samples: int = 100,
    seed: int = 0,
) -> GradCheckReport:
    """
    Verifica backward() contra diferencias finitas centrales.

    Se ejecuta en modo eval (batchnorm con estadísticas móviles, dropout identidad),
    por lo que la pérdida es una función determinística de los parámetros.

    Args:
        model: Modelo con loss()/loss_backward()
        batch: Batch de entrada
        epsilon: Paso de la diferencia finita
        tolerance: Error relativo máximo admitido
        num_samples: Coordenadas a muestrear (todas si hay menos)
        seed: Semilla del muestreo

    Returns:
        GradCheckReport

    Raises:
        CheckFailed: Con la peor coordenada y ambos valores
    """
    _, analytic = compute_analytic_gradients(model, batch)
    return compare_gradients(model, batch, analytic, epsilon, tolerance, num_samples, seed)
