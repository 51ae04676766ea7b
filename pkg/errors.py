"""
Errors
Jerarquía de excepciones del toolkit. El CLI traduce cada familia a un código de salida:
UsageError -> 1, DataError / ModelError -> 2, CheckFailed -> 3.
"""
from typing import Any, Optional


class BetterGNNError(Exception):
    """Excepción base del toolkit."""


class UsageError(BetterGNNError, ValueError):
    """Uso incorrecto del CLI o configuración inválida."""


# ========== Datos ==========

class DataError(BetterGNNError, ValueError):
    """Datos de entrada inválidos (grafos, datasets, archivos)."""


class IndexOutOfRange(DataError):
    pass


class SelfLoop(DataError):
    pass


class DuplicateEdge(DataError):
    pass


class RaggedFeatureMatrix(DataError):
    pass


class EmptyBatch(DataError):
    pass


class FeatureDimMismatch(DataError):
    pass


class BadFractions(DataError):
    pass


class ClassMissing(DataError):
    pass


class TooLarge(DataError):
    pass


class TooDense(DataError):
    pass


class EmptySplit(DataError):
    pass


class InsufficientData(DataError):
    pass


class LabelOutOfRange(DataError):
    pass


class ParseError(DataError):
    """Error de parseo de un archivo; incluye el número de línea."""

    def __init__(self, line_number: int, reason: str):
        self.line_number = line_number
        self.reason = reason
        super().__init__(f'Línea {line_number}: {reason}')


class VersionMismatch(DataError):
    pass


class ValidationFailed(DataError):
    pass


# ========== Modelo ==========

class ModelError(BetterGNNError, ValueError):
    """Errores de forma, modo o estado en la red neuronal."""


class ShapeMismatch(ModelError):
    pass


class DimMismatch(ModelError):
    pass


class EmptyGraphInBatch(ModelError):
    pass


class SingleRowTrainBatch(ModelError):
    pass


class RateOutOfRange(ModelError):
    pass


class NoForwardPass(ModelError):
    pass


class NoGradient(ModelError):
    pass


class NonFiniteTensor(ModelError):
    pass


# ========== Verificaciones ==========

class CheckFailed(BetterGNNError):
    """Una verificación (p. ej. el chequeo de gradientes) no pasó."""

    def __init__(self, message: str, report: Optional[Any] = None):
        self.report = report
        super().__init__(message)
