"""
Tests de config: precedencia flag > archivo > entorno/default y validación.
"""
import json

import pytest

from config import SynthConfig, TrainConfig, load_config_file, resolve_synth_config, resolve_train_config
from errors import UsageError


def _config_file(tmp_path, text, name='run.env'):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_defaults_without_file():
    assert resolve_train_config() == TrainConfig()
    assert resolve_synth_config() == SynthConfig()
    assert load_config_file(None) == {}


def test_file_values_override_defaults(tmp_path):
    path = _config_file(tmp_path, 'EPOCHS=7\nLEARNING_RATE=0.01\nSPLIT_FRACTIONS=0.6,0.2,0.2\nCONCAT_NEWS=true\n')
    config = resolve_train_config(path)
    assert config.epochs == 7
    assert config.learning_rate == 0.01
    assert config.split_fractions == (0.6, 0.2, 0.2)
    assert config.concat_news is True
    assert config.batch_size == TrainConfig().batch_size


def test_cli_flags_win_over_file(tmp_path):
    path = _config_file(tmp_path, 'EPOCHS=7\nSEED=3\n')
    config = resolve_train_config(path, {'epochs': 2, 'seed': None})
    assert config.epochs == 2
    assert config.seed == 3


def test_unknown_key_is_rejected(tmp_path):
    with pytest.raises(UsageError, match='EPOCS'):
        resolve_train_config(_config_file(tmp_path, 'EPOCS=7\n'))


@pytest.mark.parametrize('line', ['EPOCHS=abc', 'DROPOUT_RATE=1.5', 'MODEL_KIND=mlp', 'CONCAT_NEWS=quizas', 'SPLIT_FRACTIONS=0.5,0.5'])
def test_invalid_values_are_rejected(tmp_path, line):
    with pytest.raises(UsageError):
        resolve_train_config(_config_file(tmp_path, line + '\n'))


def test_missing_file(tmp_path):
    with pytest.raises(UsageError):
        resolve_train_config(str(tmp_path / 'nope.env'))


def test_invalid_override():
    with pytest.raises(UsageError):
        resolve_train_config(None, {'batch_size': 0})
    with pytest.raises(UsageError):
        resolve_train_config(None, {'rewiring': 'shuffle'})


def test_zero_learning_rate_is_allowed():
    assert resolve_train_config(None, {'learning_rate': 0.0}).learning_rate == 0.0


def test_synth_and_train_keys_share_one_file(tmp_path):
    path = _config_file(tmp_path, 'SEED=9\nEPOCHS=4\nSYNTH_GRAPHS_PER_CLASS=5\nSYNTH_FEATURE_SIGNAL=0\nLOG_LEVEL=DEBUG\n')
    synth = resolve_synth_config(path)
    assert (synth.seed, synth.graphs_per_class, synth.feature_signal) == (9, 5, 0.0)
    train = resolve_train_config(path)
    assert (train.seed, train.epochs) == (9, 4)


def test_configs_serialize_to_json():
    assert json.loads(json.dumps(TrainConfig().to_dict()))['split_fractions'] == list(TrainConfig().split_fractions)
    assert json.loads(json.dumps(SynthConfig().to_dict()))['seed'] == SynthConfig().seed


def test_better_gnn_needs_two_graphs_per_batch():
    with pytest.raises(UsageError, match='batchnorm'):
        TrainConfig(batch_size=1).validate()
    assert TrainConfig(batch_size=1, model_kind='gcn').validate().batch_size == 1
    assert TrainConfig(batch_size=2).validate().batch_size == 2
