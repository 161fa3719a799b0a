"""Exception hierarchy.

Every error carries the process exit code the CLI maps it to:
0 success, 2 config/validation, 3 data/shape, 4 numeric failure,
5 total sweep failure.
"""


class CostUpliftError(Exception):
    exit_code = 1


class ConfigError(CostUpliftError):
    exit_code = 2


class ValidationError(CostUpliftError):
    exit_code = 2


class DataError(CostUpliftError):
    exit_code = 3


class SchemaError(DataError):
    pass


class ParseError(DataError):
    pass


class RecipeError(DataError):
    pass


class ShapeError(DataError):
    pass


class EvaluationError(DataError):
    """Raised when a row set lacks a treated or a control group."""


class NumericError(CostUpliftError):
    exit_code = 4


class TrainingError(NumericError):
    """Non-finite loss during optimization.

    Attributes
    ----------
    iteration : int
        Index of the iteration that produced the non-finite value.
    last_params : numpy.ndarray or None
        Last parameter vector for which the loss was finite.
    """

    def __init__(self, message, iteration, last_params=None):
        super().__init__(message)
        self.iteration = iteration
        self.last_params = last_params


class SelectionError(NumericError):
    pass


class SweepError(CostUpliftError):
    exit_code = 5


class UndefinedSlopeError(NumericError):
    """Selected rows have zero cost effect, so the gain/cost slope is undefined."""


class ComparisonError(DataError):
    pass
