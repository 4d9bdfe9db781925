"""Exception types raised across the package."""


class QalignError(Exception):
    """Base class for every error raised by qalign."""


class ShapeError(QalignError, ValueError):
    pass


class EmptyInputError(QalignError, ValueError):
    pass


class DomainError(QalignError, ValueError):
    pass


class SchemeError(QalignError, ValueError):
    pass


class CalibrationError(QalignError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return str(self.args[0]) if self.args else ""


class VocabularyError(QalignError, IndexError):
    pass


class ScoringError(QalignError, ValueError):
    pass


class UndefinedCorrelationError(QalignError, ValueError):
    pass


class WorkloadError(QalignError, RuntimeError):
    def __init__(self, run_index: int, cause: BaseException):
        super().__init__(f"workload failed on run {run_index}: {cause!r}")
        self.run_index = run_index
        self.cause = cause


class FormatError(QalignError, ValueError):
    """Malformed input file (container, TSV, JSON)."""
