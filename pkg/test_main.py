"""
Tests del CLI: códigos de salida, salida JSON y un pipeline completo en miniatura.
"""
import csv
import logging
import json
import os

import pytest

from main import EXIT_CHECK, EXIT_DATA, EXIT_OK, EXIT_USAGE, main


SMALL_GEN = ['--graphs', '8', '--min-nodes', '5', '--max-nodes', '10', '--feat-dim', '4']
QUICK_TRAIN = ['--hidden-dim', '8', '--batch-size', '8', '--lr', '0.01']


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr().out
    return code, (json.loads(out) if out.strip() else None)


@pytest.fixture
def dataset_path(tmp_path, capsys):
    path = str(tmp_path / 'synth.jsonl')
    code, _ = _run(capsys, 'gen', '--out', path, '--seed', 1, *SMALL_GEN)
    assert code == EXIT_OK
    return path


def test_gradcheck_passes(capsys):
    code, payload = _run(capsys, 'gradcheck', '--seed', 7)
    assert code == EXIT_OK
    assert payload['command'] == 'gradcheck'
    assert payload['status'] == 'ok'
    assert payload['passed'] is True
    assert payload['model_kind'] == 'better_gnn'


@pytest.mark.parametrize('kind', ['gcn', 'sage', 'gat'])
def test_gradcheck_baselines(capsys, kind):
    code, payload = _run(capsys, 'gradcheck', '--seed', 3, '--model', kind, '--concat-news')
    assert code == EXIT_OK
    assert payload['passed'] is True


def test_gradcheck_impossible_tolerance_fails(capsys):
    code, payload = _run(capsys, 'gradcheck', '--seed', 7, '--tolerance', 0)
    assert code == EXIT_CHECK
    assert payload['status'] == 'failed'
    assert payload['passed'] is False


def test_usage_errors(capsys, tmp_path):
    assert main(['train', '--out-dir', str(tmp_path)]) == EXIT_USAGE
    assert 'usage' in capsys.readouterr().err
    assert main([]) == EXIT_USAGE
    assert main(['fly']) == EXIT_USAGE
    assert main(['compare', '--dataset', 'x', '--models', 'mlp']) == EXIT_USAGE
    assert main(['gen', '--out', str(tmp_path / 'x.jsonl'), '--config', str(tmp_path / 'missing.env')]) == EXIT_USAGE


def test_gen_is_byte_identical(tmp_path, capsys):
    first, second = str(tmp_path / 'a.jsonl'), str(tmp_path / 'b.jsonl')
    for path in (first, second):
        code, payload = _run(capsys, 'gen', '--graphs', 20, '--seed', 1, '--out', path)
        assert code == EXIT_OK
        assert payload['num_graphs'] == 40
    with open(first, 'rb') as a, open(second, 'rb') as b:
        assert a.read() == b.read()


def test_bad_dataset_file(tmp_path, capsys):
    path = tmp_path / 'broken.jsonl'
    path.write_text('esto no es json\n')
    code, payload = _run(capsys, 'summarize', '--dataset', str(path), '--out', str(tmp_path / 's.csv'))
    assert code == EXIT_DATA
    assert payload['status'] == 'error'
    assert payload['error'] == 'ParseError'


def test_augment_pipeline(dataset_path, tmp_path, capsys):
    augmented = str(tmp_path / 'augmented.jsonl')
    code, payload = _run(capsys, 'augment', '--dataset', dataset_path, '--out', augmented)
    assert code == EXIT_OK
    assert payload['feat_dim'] == 6

    code, _ = _run(capsys, 'augment', '--dataset', augmented, '--out', str(tmp_path / 'twice.jsonl'))
    assert code == EXIT_DATA

    code, payload = _run(capsys, 'train', '--dataset', augmented, '--out-dir', str(tmp_path / 'gcn'),
                         '--model', 'gcn', '--epochs', 1, *QUICK_TRAIN)
    assert code == EXIT_DATA
    assert payload['error'] == 'DimMismatch'


def test_summarize_and_analyze(dataset_path, tmp_path, capsys):
    summaries = str(tmp_path / 'summaries.csv')
    code, payload = _run(capsys, 'summarize', '--dataset', dataset_path, '--out', summaries)
    assert code == EXIT_OK
    assert payload['num_graphs'] == 16

    out_dir = str(tmp_path / 'analysis')
    code, payload = _run(capsys, 'analyze', '--summaries', summaries, '--out-dir', out_dir)
    assert code == EXIT_OK
    assert payload['num_graphs'] == 16
    assert [c['feature'] for c in payload['comparisons']] == [
        'avg_degree', 'mean_degree_centrality', 'mean_clustering', 'density', 'node_count',
    ]
    assert sorted(payload['files']) == ['boxstats', 'correlation', 'histogram', 'report', 'scatter']
    assert os.path.exists(os.path.join(out_dir, 'report.json'))


def test_train_eval_and_resume(dataset_path, tmp_path, capsys):
    out_dir = str(tmp_path / 'run')
    code, payload = _run(capsys, 'train', '--dataset', dataset_path, '--out-dir', out_dir, '--epochs', 2, *QUICK_TRAIN)
    assert code == EXIT_OK
    assert payload['last_epoch'] == 2
    assert 1 <= payload['best_epoch'] <= 2
    assert 0.0 <= payload['test']['accuracy'] <= 1.0
    assert payload['config']['hidden_dim'] == 8

    code, report = _run(capsys, 'eval', '--checkpoint', os.path.join(out_dir, 'best.npz'), '--dataset', dataset_path)
    assert code == EXIT_OK
    assert report['accuracy'] == payload['test']['accuracy']
    assert report['split'] == 'test'

    code, payload = _run(capsys, 'train', '--dataset', dataset_path, '--out-dir', out_dir,
                         '--epochs', 3, '--resume', *QUICK_TRAIN)
    assert code == EXIT_OK
    assert payload['last_epoch'] == 3
    with open(os.path.join(out_dir, 'epochs.csv'), newline='') as f:
        assert [row['epoch'] for row in csv.DictReader(f)] == ['1', '2', '3']


def test_resume_requires_previous_run(dataset_path, tmp_path, capsys):
    code, _ = _run(capsys, 'train', '--dataset', dataset_path, '--out-dir', str(tmp_path / 'empty'), '--resume')
    assert code == EXIT_USAGE


def test_config_file_feeds_training(dataset_path, tmp_path, capsys):
    config = tmp_path / 'run.env'
    config.write_text('EPOCHS=1\nHIDDEN_DIM=4\nMODEL_KIND=sage\n')
    code, payload = _run(capsys, 'train', '--dataset', dataset_path, '--out-dir', str(tmp_path / 'cfg'),
                         '--config', str(config), '--batch-size', 8)
    assert code == EXIT_OK
    assert payload['model_kind'] == 'sage'
    assert payload['config']['epochs'] == 1
    assert payload['config']['hidden_dim'] == 4


def test_ablate_and_compare(dataset_path, tmp_path, capsys):
    out = str(tmp_path / 'ablation.csv')
    code, payload = _run(capsys, 'ablate', '--dataset', dataset_path, '--seeds', '0,1', '--epochs', 1,
                         '--out', out, *QUICK_TRAIN)
    assert code == EXIT_OK
    assert [r['seed'] for r in payload['reports']] == [0, 1]
    assert payload['mean']['seed'] is None
    with open(out, newline='') as f:
        assert [row['seed'] for row in csv.DictReader(f)] == ['0', '1', '']

    code, payload = _run(capsys, 'compare', '--dataset', dataset_path, '--models', 'better_gnn,gcn',
                         '--epochs', 1, *QUICK_TRAIN)
    assert code == EXIT_OK
    assert payload['reference'] == 'gcn'
    assert set(payload['reports']) == {'better_gnn', 'gcn'}
    assert payload['deltas']['gcn'] == {'macro_f1': 0.0, 'auc': 0.0}


def _logged_epochs(out_dir):
    with open(os.path.join(out_dir, 'epochs.csv'), newline='') as f:
        return [row['epoch'] for row in csv.DictReader(f)]


def test_fresh_train_replaces_epoch_log(dataset_path, tmp_path, capsys):
    out_dir = str(tmp_path / 'run')
    for _ in range(2):
        code, _ = _run(capsys, 'train', '--dataset', dataset_path, '--out-dir', out_dir, '--epochs', 2, *QUICK_TRAIN)
        assert code == EXIT_OK
    assert _logged_epochs(out_dir) == ['1', '2']

    os.remove(os.path.join(out_dir, 'epochs.csv'))
    code, _ = _run(capsys, 'train', '--dataset', dataset_path, '--out-dir', out_dir,
                   '--epochs', 3, '--resume', *QUICK_TRAIN)
    assert code == EXIT_OK
    assert _logged_epochs(out_dir) == ['1', '2', '3']


def test_train_rejects_single_graph_batches(dataset_path, tmp_path, capsys):
    code, _ = _run(capsys, 'train', '--dataset', dataset_path, '--out-dir', str(tmp_path / 'bs1'),
                   '--epochs', 1, '--batch-size', 1)
    assert code == EXIT_USAGE


def test_analyze_single_class_warns(tmp_path, capsys, caplog):
    summaries = tmp_path / 'summaries.csv'
    summaries.write_text(
        'graph_id,label,avg_degree,mean_degree_centrality,mean_clustering,density,node_count\n'
        + ''.join(f'g{i},0,{1.5 + 0.1 * i},{0.2 + 0.01 * i},{0.05 * i},{0.3 + 0.02 * i},{5 + i}\n' for i in range(4))
    )
    caplog.set_level(logging.WARNING, logger='main')
    code, payload = _run(capsys, 'analyze', '--summaries', str(summaries), '--out-dir', str(tmp_path / 'analysis'))
    assert code == EXIT_OK
    assert payload['comparisons'] == []
    assert 'Sin comparación entre clases' in caplog.text
