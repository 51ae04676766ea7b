"""
Tests de nn_core: capas, pérdida, gradientes (por capa contra diferencias finitas) e invariancias.
"""
import numpy as np
import pytest

from conftest import permuted
from errors import (
    CheckFailed,
    EmptyGraphInBatch,
    LabelOutOfRange,
    NoForwardPass,
    RateOutOfRange,
    ShapeMismatch,
    SingleRowTrainBatch,
)
from nn_core import (
    MLP,
    AttentionPool,
    BatchNorm,
    Dropout,
    GATConv,
    GCNConv,
    GINConv,
    GlobalMaxPool,
    Linear,
    Module,
    Parameter,
    ReLU,
    SAGEConv,
    attention_pool,
    batchnorm,
    compare_gradients,
    compute_analytic_gradients,
    cross_entropy,
    dropout,
    gat_conv,
    gcn_conv,
    gin_conv,
    global_max_pool,
    grad_check,
    sage_conv,
    softmax_rows,
)


def _identity_mlp(dim):
    mlp = MLP([dim, dim], np.random.default_rng(0))
    linear = mlp.layers[0]
    linear.weight.value[...] = np.eye(dim)
    linear.bias.value[...] = 0.0
    return mlp


class ProjectedLoss(Module):
    """Pérdida lineal Σ salida · R sobre una capa, con la entrada como parámetro."""

    def __init__(self, layer, x, call, seed=0, keep_training=False):
        super().__init__()
        self.x = Parameter(x)
        self.layer = layer
        self.call = call
        self.keep_training = keep_training
        self.seed = seed
        self._weights = None

    def eval(self):
        if not self.keep_training:
            super().eval()

    def loss(self, _batch):
        out = self.call(self.layer, self.x.value)
        if self._weights is None:
            self._weights = np.random.default_rng(self.seed).standard_normal(out.shape)
        return float(np.sum(out * self._weights))

    def loss_backward(self):
        self.x.accumulate(self.layer.backward(self._weights))


class NoParameters(Module):

    def loss(self, _batch):
        return 0.0

    def loss_backward(self):
        pass


def _random_edges(seed, n, p):
    rng = np.random.default_rng(seed)
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p]
    return np.array(pairs, dtype=np.int64).reshape(-1, 2)


# ========== Formas funcionales ==========

def test_gin_conv_examples():
    x = np.array([[1.0, 2.0], [3.0, 5.0]])
    mlp = _identity_mlp(2)
    assert np.array_equal(gin_conv(x[:1], np.zeros((0, 2)), 0.0, mlp), x[:1])
    assert gin_conv(x, np.array([[0, 1]]), 0.0, mlp)[0].tolist() == [4.0, 7.0]

    same = np.tile([[0.5, -1.0]], (3, 1))
    out = gin_conv(same, np.array([[0, 1], [1, 2], [0, 2]]), 0.0, mlp)
    assert np.allclose(out, 3 * same)


def test_gin_conv_checks_shapes():
    mlp = _identity_mlp(2)
    with pytest.raises(ShapeMismatch):
        gin_conv(np.ones(2), np.zeros((0, 2)), 0.0, mlp)
    with pytest.raises(ShapeMismatch):
        gin_conv(np.ones((2, 2)), np.array([[0, 2]]), 0.0, mlp)


def test_isolated_node_convolutions():
    x = np.array([[1.5, -2.0]])
    no_edges = np.zeros((0, 2), dtype=np.int64)
    eye = np.eye(2)
    assert np.array_equal(gcn_conv(x, no_edges, eye), x)
    assert np.array_equal(sage_conv(x, no_edges, eye, eye), x)

    weight = np.array([[1.0, 2.0], [0.5, -1.0]])
    attn = np.array([[0.3, -0.2], [0.1, 0.4]])
    assert np.allclose(gat_conv(x, no_edges, weight, attn), x @ weight)


def test_convolutions_check_shapes():
    x = np.ones((3, 2))
    with pytest.raises(ShapeMismatch):
        gcn_conv(x, np.array([[0, 1]]), np.ones((4, 2)))
    with pytest.raises(ShapeMismatch):
        gcn_conv(x, np.array([[0, 3]]), np.ones((2, 2)))


def test_attention_pool_examples():
    h = np.array([[2.0, -1.0]])
    z, alpha = attention_pool(h, np.array([0]), np.array([0.3, 0.7]))
    assert alpha.tolist() == [1.0]
    assert np.array_equal(z, h)

    h = np.array([[1.0, 0.0], [0.0, 1.0]])
    z, alpha = attention_pool(h, np.array([0, 0]), np.array([1.0, 1.0]))
    assert alpha.tolist() == [0.5, 0.5]

    rng = np.random.default_rng(0)
    h = rng.standard_normal((7, 3))
    membership = np.array([0, 0, 0, 1, 1, 1, 1])
    _, alpha = attention_pool(h, membership, rng.standard_normal(3))
    assert np.bincount(membership, weights=alpha) == pytest.approx([1.0, 1.0], abs=1e-12)


def test_pooling_rejects_empty_graph():
    h = np.ones((2, 2))
    with pytest.raises(EmptyGraphInBatch):
        attention_pool(h, np.array([0, 2]), np.ones(2), num_graphs=3)
    with pytest.raises(EmptyGraphInBatch):
        global_max_pool(h, np.array([0, 0]), num_graphs=2)


def test_global_max_pool_examples():
    h = np.array([[1.0, 2.0], [3.0, 0.0]])
    assert global_max_pool(h, np.array([0, 0])).tolist() == [[3.0, 2.0]]
    assert global_max_pool(h[:1], np.array([0])).tolist() == [[1.0, 2.0]]
    assert global_max_pool(h, np.array([0, 1])).tolist() == [[1.0, 2.0], [3.0, 0.0]]


def test_batchnorm_examples():
    state = BatchNorm(2)
    state.eval()
    x = np.array([[0.3, -1.2], [2.0, 4.0]])
    assert batchnorm(x, state) == pytest.approx(x, abs=1e-4)

    state = BatchNorm(2)
    out = batchnorm(np.array([[5.0, 0.0], [5.0, 2.0]]), state)
    assert out[:, 0].tolist() == [0.0, 0.0]
    assert out[:, 1] == pytest.approx([-1.0, 1.0], abs=1e-4)
    assert np.all(state.running_var >= 0)

    with pytest.raises(SingleRowTrainBatch):
        batchnorm(np.ones((1, 2)), BatchNorm(2))


def test_dropout_examples():
    x = np.random.default_rng(0).standard_normal((20, 5))
    assert np.array_equal(dropout(x, 0.0, seed=1), x)
    assert np.array_equal(dropout(x, 0.9, seed=1, training=False), x)
    first = dropout(x, 0.5, seed=3)
    assert np.array_equal(first, dropout(x, 0.5, seed=3))
    assert set(np.unique(first[first != 0] / x[first != 0]).round(12)) == {2.0}
    with pytest.raises(RateOutOfRange):
        Dropout(1.0)


def test_softmax_rows():
    assert softmax_rows(np.array([[0.0, 0.0]])).tolist() == [[0.5, 0.5]]
    rng = np.random.default_rng(0)
    for _ in range(100):
        probs = softmax_rows(rng.normal(scale=3.0, size=(int(rng.integers(1, 10)), int(rng.integers(2, 6)))))
        assert probs.sum(axis=1) == pytest.approx(np.ones(probs.shape[0]), abs=1e-12)
        assert np.all((probs > 0) & (probs < 1))


def test_cross_entropy_examples():
    assert cross_entropy(np.array([[0.5, 0.5]]), np.array([0])) == pytest.approx(np.log(2))
    assert cross_entropy(np.array([[1.0, 0.0]]), np.array([0])) == 0.0
    assert cross_entropy(np.array([[0.0, 1.0]]), np.array([0])) == pytest.approx(-np.log(1e-15))
    with pytest.raises(LabelOutOfRange):
        cross_entropy(np.array([[0.5, 0.5]]), np.array([2]))


# ========== Backward ==========

def test_backward_requires_forward():
    layer = Linear(2, 2, np.random.default_rng(0))
    with pytest.raises(NoForwardPass):
        layer.backward(np.ones((1, 2)))
    with pytest.raises(NoForwardPass):
        ReLU().backward(np.ones((1, 2)))


def test_linear_matches_closed_form_squared_loss():
    rng = np.random.default_rng(0)
    layer = Linear(3, 2, rng, bias=False)
    x = rng.standard_normal((1, 3))
    y = rng.standard_normal((1, 2))
    residual = layer.forward(x) - y
    layer.backward(2 * residual)
    assert np.allclose(layer.weight.grad, 2 * x.T @ residual)


def test_unused_parameter_gets_zero_gradient():
    rng = np.random.default_rng(0)
    h = rng.standard_normal((3, 2))
    pool = AttentionPool(2, rng)
    pool.forward(h, np.array([0, 1, 2]))
    pool.backward(np.ones((3, 2)))
    # un nodo por grafo: α = 1 sin importar la compuerta
    assert np.array_equal(pool.gate.grad, np.zeros((2, 1)))


def _layer_cases():
    rng = np.random.default_rng(42)
    n = 9
    edges = _random_edges(1, n, 0.35)
    x = rng.standard_normal((n, 3))
    membership = np.array([0, 0, 0, 0, 1, 1, 1, 1, 1])

    bn_eval = BatchNorm(3)
    bn_eval.running_mean[:] = rng.standard_normal(3)
    bn_eval.running_var[:] = rng.uniform(0.5, 2.0, 3)

    return {
        'linear': ProjectedLoss(Linear(3, 4, rng), x, lambda layer, v: layer.forward(v)),
        'relu': ProjectedLoss(ReLU(), x, lambda layer, v: layer.forward(v)),
        'mlp': ProjectedLoss(MLP([3, 5, 4], rng), x, lambda layer, v: layer.forward(v)),
        'gin': ProjectedLoss(GINConv(3, 4, rng), x, lambda layer, v: layer.forward(v, edges)),
        'gcn': ProjectedLoss(GCNConv(3, 4, rng), x, lambda layer, v: layer.forward(v, edges)),
        'sage': ProjectedLoss(SAGEConv(3, 4, rng), x, lambda layer, v: layer.forward(v, edges)),
        'gat': ProjectedLoss(GATConv(3, 4, rng), x, lambda layer, v: layer.forward(v, edges)),
        'attention_pool': ProjectedLoss(AttentionPool(3, rng), x, lambda layer, v: layer.forward(v, membership, 2)),
        'max_pool': ProjectedLoss(GlobalMaxPool(), x, lambda layer, v: layer.forward(v, membership, 2)),
        'batchnorm_eval': ProjectedLoss(bn_eval, x, lambda layer, v: layer.forward(v)),
        'batchnorm_train': ProjectedLoss(BatchNorm(3), x, lambda layer, v: layer.forward(v), keep_training=True),
    }


@pytest.mark.parametrize('name', sorted(_layer_cases()))
def test_grad_check_per_layer(name):
    layer = _layer_cases()[name]
    report = grad_check(layer, None, epsilon=1e-5, tolerance=1e-4, num_samples=200, seed=3)
    assert report.passed
    assert report.max_relative_error < 1e-4


def test_grad_check_detects_corrupted_gradient():
    layer = _layer_cases()['gin']
    _, analytic = compute_analytic_gradients(layer, None)
    corrupted = [g * 1.1 for g in analytic]
    with pytest.raises(CheckFailed) as info:
        compare_gradients(layer, None, corrupted)
    report = info.value.report
    assert not report.passed
    assert report.worst_parameter is not None
    assert report.worst_analytic != pytest.approx(report.worst_numeric)


def test_grad_check_zero_parameter_model_passes():
    report = grad_check(NoParameters(), None)
    assert report.passed
    assert report.num_checked == 0


# ========== Invariancias ==========

def test_convolutions_are_permutation_equivariant(make_graph):
    rng = np.random.default_rng(0)
    layers = [GINConv(3, 4, rng), GCNConv(3, 4, rng), SAGEConv(3, 4, rng), GATConv(3, 4, rng)]
    for seed in range(25):
        g = make_graph(seed, 12, 0.3)
        perm = rng.permutation(g.num_nodes)
        h = permuted(g, perm)
        for layer in layers:
            layer.eval()
            base = layer.forward(g.features, g.edges)
            assert np.allclose(layer.forward(h.features, h.edges), base[perm], atol=1e-10)


def test_pools_are_permutation_invariant():
    rng = np.random.default_rng(1)
    attention = AttentionPool(4, rng)
    maximum = GlobalMaxPool()
    for _ in range(100):
        n = int(rng.integers(1, 12))
        h = rng.standard_normal((n, 4))
        perm = rng.permutation(n)
        membership = np.zeros(n, dtype=np.int64)
        assert np.allclose(attention.forward(h[perm], membership), attention.forward(h, membership), atol=1e-12)
        assert np.array_equal(maximum.forward(h[perm], membership), maximum.forward(h, membership))
