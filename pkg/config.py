"""
Configuration
Configuración centralizada del toolkit: valores por defecto desde el entorno (.env),
archivos de configuración KEY=VALUE y overrides del CLI.

Precedencia: flag del CLI > archivo --config > entorno/.env > valor por defecto.
"""
import os
from dataclasses import dataclass, fields, replace
from typing import Any, Callable, Dict, Mapping, Optional, Tuple

from dotenv import dotenv_values, load_dotenv

from errors import UsageError

load_dotenv()

MODEL_KINDS = ('better_gnn', 'gcn', 'sage', 'gat')
REWIRING_MODES = ('uniform', 'degree_preserving')


def _parse_bool(raw: str) -> bool:
    value = str(raw).strip().lower()
    if value in ('1', 'true', 'yes', 'si', 'sí', 'on'):
        return True
    if value in ('0', 'false', 'no', 'off', ''):
        return False
    raise ValueError(f'valor booleano inválido: {raw!r}')


def _parse_fractions(raw: str) -> Tuple[float, float, float]:
    parts = [float(p) for p in str(raw).split(',') if p.strip()]
    if len(parts) != 3:
        raise ValueError(f'se esperaban 3 fracciones separadas por coma: {raw!r}')
    return (parts[0], parts[1], parts[2])


class BetterGNNConfig:
    """Configuración por defecto leída del entorno."""

    # Entrenamiento
    LEARNING_RATE = float(os.getenv('LEARNING_RATE', '1e-3'))
    WEIGHT_DECAY = float(os.getenv('WEIGHT_DECAY', '5e-4'))
    BATCH_SIZE = int(os.getenv('BATCH_SIZE', '64'))
    EPOCHS = int(os.getenv('EPOCHS', '50'))
    SEED = int(os.getenv('SEED', '42'))

    # Modelo
    DROPOUT_RATE = float(os.getenv('DROPOUT_RATE', '0.5'))
    HIDDEN_DIM = int(os.getenv('HIDDEN_DIM', '128'))
    MODEL_KIND = os.getenv('MODEL_KIND', 'better_gnn')
    CONCAT_NEWS = _parse_bool(os.getenv('CONCAT_NEWS', 'false'))

    # Dataset
    SPLIT_FRACTIONS = _parse_fractions(os.getenv('SPLIT_FRACTIONS', '0.7,0.1,0.2'))

    # Ablación
    REWIRING = os.getenv('REWIRING', 'uniform')

    # Generador sintético
    SYNTH_GRAPHS_PER_CLASS = int(os.getenv('SYNTH_GRAPHS_PER_CLASS', '200'))
    SYNTH_MIN_NODES = int(os.getenv('SYNTH_MIN_NODES', '10'))
    SYNTH_MAX_NODES = int(os.getenv('SYNTH_MAX_NODES', '30'))
    SYNTH_FEAT_DIM = int(os.getenv('SYNTH_FEAT_DIM', '16'))
    SYNTH_STRUCTURE_SIGNAL = float(os.getenv('SYNTH_STRUCTURE_SIGNAL', '0.4'))
    SYNTH_FEATURE_SIGNAL = float(os.getenv('SYNTH_FEATURE_SIGNAL', '1.0'))
    SYNTH_BASE_CLOSURE = float(os.getenv('SYNTH_BASE_CLOSURE', '0.05'))

    # Logging
    LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO')

    @classmethod
    def to_dict(cls) -> Dict[str, Any]:
        """Retorna la configuración como diccionario."""
        return {
            'learning_rate': cls.LEARNING_RATE,
            'weight_decay': cls.WEIGHT_DECAY,
            'batch_size': cls.BATCH_SIZE,
            'epochs': cls.EPOCHS,
            'seed': cls.SEED,
            'dropout_rate': cls.DROPOUT_RATE,
            'hidden_dim': cls.HIDDEN_DIM,
            'model_kind': cls.MODEL_KIND,
            'concat_news': cls.CONCAT_NEWS,
            'split_fractions': list(cls.SPLIT_FRACTIONS),
            'rewiring': cls.REWIRING,
        }

    @classmethod
    def print_config(cls):
        """Imprime la configuración actual."""
        print("📋 Configuración de entrenamiento:")
        print(f"   • Modelo: {cls.MODEL_KIND} (hidden={cls.HIDDEN_DIM}, dropout={cls.DROPOUT_RATE})")
        print(f"   • Adam: lr={cls.LEARNING_RATE}, weight decay={cls.WEIGHT_DECAY}")
        print(f"   • Batch size: {cls.BATCH_SIZE}")
        print(f"   • Épocas: {cls.EPOCHS}")
        print(f"   • Splits: {cls.SPLIT_FRACTIONS}")
        print(f"   • Seed: {cls.SEED}")


@dataclass(frozen=True)
class TrainConfig:
    """
    Hiperparámetros de entrenamiento y de arquitectura.

    El learning rate por defecto es 1e-3 y el weight decay 5e-4 (L2 acoplado).
    """
    learning_rate: float = BetterGNNConfig.LEARNING_RATE
    weight_decay: float = BetterGNNConfig.WEIGHT_DECAY
    batch_size: int = BetterGNNConfig.BATCH_SIZE
    epochs: int = BetterGNNConfig.EPOCHS
    seed: int = BetterGNNConfig.SEED
    dropout_rate: float = BetterGNNConfig.DROPOUT_RATE
    hidden_dim: int = BetterGNNConfig.HIDDEN_DIM
    model_kind: str = BetterGNNConfig.MODEL_KIND
    split_fractions: Tuple[float, float, float] = BetterGNNConfig.SPLIT_FRACTIONS
    concat_news: bool = BetterGNNConfig.CONCAT_NEWS
    rewiring: str = BetterGNNConfig.REWIRING

    def validate(self) -> 'TrainConfig':
        """
        Verifica los invariantes de la configuración.

        Returns:
            La misma configuración si es válida

        Raises:
            UsageError: Si algún valor está fuera de rango
        """
        if not self.learning_rate >= 0:
            raise UsageError(f'learning_rate debe ser >= 0 (recibido {self.learning_rate})')
        if self.weight_decay < 0:
            raise UsageError(f'weight_decay debe ser >= 0 (recibido {self.weight_decay})')
        if self.batch_size < 1:
            raise UsageError(f'batch_size debe ser >= 1 (recibido {self.batch_size})')
        if self.model_kind == 'better_gnn' and self.batch_size < 2:
            raise UsageError(
                f'batch_size debe ser >= 2 para better_gnn: el batchnorm de la cabeza necesita al menos 2 grafos '
                f'por batch (recibido {self.batch_size})'
            )
        if self.epochs < 1:
            raise UsageError(f'epochs debe ser >= 1 (recibido {self.epochs})')
        if not 0.0 <= self.dropout_rate < 1.0:
            raise UsageError(f'dropout_rate debe estar en [0, 1) (recibido {self.dropout_rate})')
        if self.hidden_dim < 1:
            raise UsageError(f'hidden_dim debe ser >= 1 (recibido {self.hidden_dim})')
        if self.model_kind not in MODEL_KINDS:
            raise UsageError(f'model_kind desconocido: {self.model_kind!r} (opciones: {MODEL_KINDS})')
        if self.rewiring not in REWIRING_MODES:
            raise UsageError(f'rewiring desconocido: {self.rewiring!r} (opciones: {REWIRING_MODES})')
        return self

    def to_dict(self) -> Dict[str, Any]:
        """Retorna la configuración como diccionario serializable a JSON."""
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data['split_fractions'] = list(self.split_fractions)
        return data


@dataclass(frozen=True)
class SynthConfig:
    """
    Configuración del generador sintético de cascadas.

    Attributes:
        graphs_per_class: Cantidad de grafos por clase
        min_nodes / max_nodes: Rango (inclusivo) de cantidad de nodos
        feat_dim: Dimensión de las features de nodo
        structure_signal: Diferencia entre clases en la probabilidad de cerrar cuñas
        feature_signal: Desplazamiento de la media de features para la clase fake
        base_closure: Probabilidad base de cerrar una cuña (clase real)
        seed: Semilla del generador
    """
    graphs_per_class: int = BetterGNNConfig.SYNTH_GRAPHS_PER_CLASS
    min_nodes: int = BetterGNNConfig.SYNTH_MIN_NODES
    max_nodes: int = BetterGNNConfig.SYNTH_MAX_NODES
    feat_dim: int = BetterGNNConfig.SYNTH_FEAT_DIM
    structure_signal: float = BetterGNNConfig.SYNTH_STRUCTURE_SIGNAL
    feature_signal: float = BetterGNNConfig.SYNTH_FEATURE_SIGNAL
    base_closure: float = BetterGNNConfig.SYNTH_BASE_CLOSURE
    seed: int = BetterGNNConfig.SEED

    def validate(self) -> 'SynthConfig':
        if self.graphs_per_class < 1:
            raise UsageError(f'graphs_per_class debe ser >= 1 (recibido {self.graphs_per_class})')
        if self.min_nodes < 2 or self.max_nodes < self.min_nodes:
            raise UsageError(
                f'rango de nodos inválido: [{self.min_nodes}, {self.max_nodes}] (mínimo 2)'
            )
        if self.feat_dim < 1:
            raise UsageError(f'feat_dim debe ser >= 1 (recibido {self.feat_dim})')
        if self.structure_signal < 0 or self.feature_signal < 0:
            raise UsageError('las señales structure_signal y feature_signal deben ser >= 0')
        if not 0.0 <= self.base_closure <= 1.0:
            raise UsageError(f'base_closure debe estar en [0, 1] (recibido {self.base_closure})')
        return self

    def to_dict(self) -> Dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


# Claves aceptadas en archivos --config: clave -> (campo, conversor)
TRAIN_KEYS: Dict[str, Tuple[str, Callable[[str], Any]]] = {
    'LEARNING_RATE': ('learning_rate', float),
    'WEIGHT_DECAY': ('weight_decay', float),
    'BATCH_SIZE': ('batch_size', int),
    'EPOCHS': ('epochs', int),
    'SEED': ('seed', int),
    'DROPOUT_RATE': ('dropout_rate', float),
    'HIDDEN_DIM': ('hidden_dim', int),
    'MODEL_KIND': ('model_kind', str),
    'SPLIT_FRACTIONS': ('split_fractions', _parse_fractions),
    'CONCAT_NEWS': ('concat_news', _parse_bool),
    'REWIRING': ('rewiring', str),
}

SYNTH_KEYS: Dict[str, Tuple[str, Callable[[str], Any]]] = {
    'SYNTH_GRAPHS_PER_CLASS': ('graphs_per_class', int),
    'SYNTH_MIN_NODES': ('min_nodes', int),
    'SYNTH_MAX_NODES': ('max_nodes', int),
    'SYNTH_FEAT_DIM': ('feat_dim', int),
    'SYNTH_STRUCTURE_SIGNAL': ('structure_signal', float),
    'SYNTH_FEATURE_SIGNAL': ('feature_signal', float),
    'SYNTH_BASE_CLOSURE': ('base_closure', float),
    'SEED': ('seed', int),
}

KNOWN_KEYS = set(TRAIN_KEYS) | set(SYNTH_KEYS) | {'LOG_LEVEL'}


def load_config_file(path: Optional[str]) -> Dict[str, str]:
    """
    Lee un archivo de configuración con formato KEY=VALUE (igual que .env).

    Args:
        path: Ruta del archivo (None = sin archivo)

    Returns:
        Diccionario clave -> valor en texto

    Raises:
        UsageError: Si el archivo no existe o contiene claves desconocidas
    """
    if not path:
        return {}

    if not os.path.exists(path):
        raise UsageError(f'Archivo de configuración no encontrado: {path}')

    values = {key.upper(): value for key, value in dotenv_values(path).items() if value is not None}
    unknown = sorted(set(values) - KNOWN_KEYS)
    if unknown:
        raise UsageError(f'Claves desconocidas en {path}: {", ".join(unknown)}')
    return values


def _apply(
    base: Any,
    keys: Mapping[str, Tuple[str, Callable[[str], Any]]],
    file_values: Mapping[str, str],
    overrides: Optional[Mapping[str, Any]],
) -> Any:
    changes: Dict[str, Any] = {}

    for key, raw in file_values.items():
        if key not in keys:
            continue
        field_name, caster = keys[key]
        try:
            changes[field_name] = caster(raw)
        except ValueError as e:
            raise UsageError(f'Valor inválido para {key}: {e}') from e

    for field_name, value in (overrides or {}).items():
        if value is not None:
            changes[field_name] = value

    return replace(base, **changes).validate()


def resolve_train_config(
    config_file: Optional[str] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> TrainConfig:
    """
    Construye la TrainConfig efectiva aplicando la precedencia documentada.

    Args:
        config_file: Archivo KEY=VALUE opcional
        overrides: Valores provenientes de flags del CLI (None = no especificado)

    Returns:
        TrainConfig validada
    """
    return _apply(TrainConfig(), TRAIN_KEYS, load_config_file(config_file), overrides)


def resolve_synth_config(
    config_file: Optional[str] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> SynthConfig:
    """Construye la SynthConfig efectiva aplicando la precedencia documentada."""
    return _apply(SynthConfig(), SYNTH_KEYS, load_config_file(config_file), overrides)


if __name__ == '__main__':
    BetterGNNConfig.print_config()
