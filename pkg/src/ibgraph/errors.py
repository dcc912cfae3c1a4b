"""Exception types shared across the package."""


class IBGraphError(Exception):
    """Base class for all package errors."""


class DimensionError(IBGraphError, ValueError):
    """Operand shapes are incompatible for the requested operation."""


class DomainError(IBGraphError, ValueError):
    """Input values are outside the mathematical domain of an operation."""


class ContractError(IBGraphError, RuntimeError):
    """An API precondition was violated by the caller."""


class ParameterError(IBGraphError, ValueError):
    """A hyperparameter or configuration value is invalid."""


class ValidationError(IBGraphError, ValueError):
    """Data failed an invariant check."""


class DatasetFormatError(ValidationError):
    """A dataset file could not be parsed; message carries the line number."""


class TrainingError(IBGraphError, RuntimeError):
    """Training aborted, e.g. the loss became non-finite."""
