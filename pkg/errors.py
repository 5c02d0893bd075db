"""
Error hierarchy for the PTELM toolkit.
Every family carries the CLI exit code it maps to.
"""
from typing import Optional


class PtelmError(Exception):
    """Base error of the toolkit"""
    exit_code = 1


# ========== CONFIG (exit 2) ==========

class ConfigError(PtelmError, ValueError):
    """Invalid experiment config or hyperparameters"""
    exit_code = 2


# ========== DATA (exit 3) ==========

class DataError(PtelmError, ValueError):
    """Problem with input data or produced artifacts"""
    exit_code = 3


class ParseError(DataError):
    def __init__(self, row: int, col: int, value: str = ""):
        self.row = row
        self.col = col
        self.value = value
        super().__init__(f"❌ Не удалось разобрать значение '{value}' (строка {row}, колонка {col})")


class RaggedRows(DataError):
    def __init__(self, row: int, expected: int, got: int):
        self.row = row
        self.expected = expected
        self.got = got
        super().__init__(f"❌ Строка {row}: ожидалось {expected} колонок, получено {got}")


class EmptyFile(DataError):
    pass


class LabelOutOfRange(DataError):
    pass


class InsufficientClassSamples(DataError):
    def __init__(self, label: int, have: int, need: int):
        self.label = label
        self.have = have
        self.need = need
        super().__init__(f"❌ Класс {label}: есть {have} примеров, нужно {need}")


class EmptyDomain(DataError):
    pass


class ClassMismatch(DataError):
    pass


class ReportWriteError(DataError):
    pass


# ========== NUMERIC (exit 4) ==========

class NumericError(PtelmError, ArithmeticError):
    """Numerical failure or inconsistent shapes"""
    exit_code = 4


class NotPositiveDefinite(NumericError):
    pass


class DimensionMismatch(NumericError):
    pass


class InvalidDimension(NumericError):
    pass


class InvalidRange(NumericError):
    pass


class DegenerateWeights(NumericError):
    pass


# ========== TRIAL WRAPPER ==========

class TrialFailed(PtelmError):
    """A trial failed; the whole experiment is aborted"""

    def __init__(self, trial_index: int, cause: Exception):
        self.trial_index = trial_index
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", PtelmError.exit_code)
        super().__init__(f"❌ Испытание {trial_index} упало: {type(cause).__name__}: {cause}")


def exit_code_for(error: Optional[BaseException]) -> int:
    """Код выхода CLI для исключения"""
    if error is None:
        return 0
    return getattr(error, "exit_code", PtelmError.exit_code)
