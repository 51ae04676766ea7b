"""
Tests de ablation: rewiring, features gaussianas y reportes de importancia.
"""
from dataclasses import replace

import numpy as np
import pytest

from ablation import (
    AblationReport,
    ablate_dataset,
    gaussian_features,
    randomize_edges,
    run_ablation,
    run_ablation_seeds,
)
from config import SynthConfig, TrainConfig
from errors import TooDense, UsageError
from propagation_graph import PropagationGraph, split_dataset, undirected_edges, validate_graph
from synth import generate
from topo_features import augment_dataset


def _tree(n, seed=0):
    rng = np.random.default_rng(seed)
    edges = [[int(rng.integers(0, i)), i] for i in range(1, n)]
    return PropagationGraph('tree', n, edges, rng.standard_normal((n, 4)), 0, 1)


def _dataset(per_class=8, seed=0, **signals):
    config = SynthConfig(
        graphs_per_class=per_class, min_nodes=5, max_nodes=12, feat_dim=6,
        structure_signal=signals.get('structure_signal', 0.4),
        feature_signal=signals.get('feature_signal', 1.0),
        base_closure=0.05, seed=seed,
    )
    return generate(config)


def _quick_config(**changes):
    base = TrainConfig(learning_rate=1e-2, batch_size=8, epochs=1, seed=0, hidden_dim=8, model_kind='better_gnn')
    return replace(base, **changes)


def test_complete_graph_keeps_its_edges(triangle):
    out = randomize_edges(triangle, seed=5)
    assert out.edges.tolist() == [[0, 1], [0, 2], [1, 2]]
    assert np.array_equal(out.features, triangle.features)


def test_uniform_rewiring_preserves_counts_and_features():
    tree = _tree(50)
    out = randomize_edges(tree, seed=1)
    validate_graph(out)
    assert out.num_edges == 49
    assert out.num_nodes == 50
    assert np.array_equal(out.features, tree.features)
    assert (out.id, out.root, out.label) == (tree.id, tree.root, tree.label)
    assert undirected_edges(out.edges).shape == (49, 2)


def test_rewiring_is_deterministic_per_seed():
    tree = _tree(40, seed=2)
    assert np.array_equal(randomize_edges(tree, seed=3).edges, randomize_edges(tree, seed=3).edges)
    assert not np.array_equal(randomize_edges(tree, seed=3).edges, randomize_edges(tree, seed=4).edges)


def test_too_many_edges_is_rejected():
    crowded = PropagationGraph('crowded', 3, [[0, 1], [1, 2], [0, 2], [1, 0]], np.zeros((3, 1)), 0, 0)
    with pytest.raises(TooDense):
        randomize_edges(crowded)


def test_unknown_rewiring_mode():
    with pytest.raises(UsageError):
        randomize_edges(_tree(5), mode='shuffle')


def test_degree_preserving_rewiring(make_graph):
    for seed in range(5):
        g = make_graph(seed, 20, 0.3)
        out = randomize_edges(g, seed=seed, mode='degree_preserving')
        validate_graph(out)
        assert out.num_edges == g.num_edges
        assert np.array_equal(out.degrees, g.degrees)
        assert np.array_equal(out.features, g.features)


def test_gaussian_features_keep_topology():
    g = PropagationGraph('big', 500, [[i, i + 1] for i in range(499)], np.ones((500, 10)), 0, 1)
    out = gaussian_features(g, seed=9)
    assert np.array_equal(out.edges, g.edges)
    assert out.features.shape == (500, 10)
    assert abs(out.features.mean()) < 0.05
    assert abs(out.features.std() - 1.0) < 0.05
    assert np.array_equal(gaussian_features(g, seed=9).features, out.features)


def test_ablate_dataset_settings():
    ds = split_dataset(_dataset(), seed=0)
    assert ablate_dataset(ds, 'original', 0) is ds

    feature_only = ablate_dataset(ds, 'feature_only', 0)
    assert feature_only.splits == ds.splits
    for a, b in zip(ds.graphs, feature_only.graphs):
        assert np.array_equal(a.features, b.features)
        assert a.num_edges == b.num_edges

    structure_only = ablate_dataset(ds, 'structure_only', 0)
    for a, b in zip(ds.graphs, structure_only.graphs):
        assert np.array_equal(a.edges, b.edges)
        assert not np.array_equal(a.features, b.features)

    with pytest.raises(UsageError):
        ablate_dataset(ds, 'text_only', 0)


def test_report_arithmetic():
    report = AblationReport('ds', 1, 'better_gnn', 'uniform', 0.9, 0.85, 0.6)
    assert report.degradation_structure == pytest.approx(0.05)
    assert report.degradation_features == pytest.approx(0.3)
    assert list(report.to_dict()) == list(AblationReport.CSV_FIELDS)

    mean = replace(report, seed=None)
    assert mean.to_row()['seed'] == ''
    assert mean.to_dict()['seed'] is None


def test_run_ablation_small():
    ds = _dataset(per_class=8)
    report = run_ablation(ds, _quick_config())
    assert report.dataset == ds.name
    assert report.seed == 0
    for value in (report.accuracy_original, report.accuracy_feature_only, report.accuracy_structure_only):
        assert 0.0 <= value <= 1.0


def test_run_ablation_strips_augmented_columns():
    ds = split_dataset(_dataset(per_class=8), seed=0)
    config = _quick_config(model_kind='gcn')
    assert run_ablation(augment_dataset(ds), config).to_dict() == run_ablation(ds, config).to_dict()


def test_run_ablation_seeds_averages():
    ds = _dataset(per_class=8)
    reports, mean = run_ablation_seeds(ds, _quick_config(), seeds=[0, 1])
    assert [r.seed for r in reports] == [0, 1]
    assert mean.seed is None
    assert mean.accuracy_original == pytest.approx(np.mean([r.accuracy_original for r in reports]))
    assert mean.accuracy_structure_only == pytest.approx(np.mean([r.accuracy_structure_only for r in reports]))
    with pytest.raises(UsageError):
        run_ablation_seeds(ds, _quick_config(), seeds=[])


@pytest.mark.slow
def test_feature_driven_labels_survive_rewiring_but_not_noise():
    ds = _dataset(per_class=200, structure_signal=0.0, feature_signal=1.0)
    config = TrainConfig(model_kind='better_gnn')
    _, mean = run_ablation_seeds(ds, config, seeds=[0, 1, 2, 3, 4])
    assert mean.accuracy_structure_only <= 0.60
    assert mean.accuracy_feature_only >= 0.90
    assert mean.degradation_structure <= 0.05
