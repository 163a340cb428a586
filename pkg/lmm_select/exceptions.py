"""
Exceptions raised by lmm_select.

Every error carries the CLI exit code it maps to and, where one exists, the
offending index (row, column, group label or λ position).
"""
from typing import Optional


class LmmSelectError(Exception):
    """Base exception for lmm_select errors."""

    exit_code = 1

    def __init__(self, message: str, index: Optional[int] = None):
        self.message = message
        self.index = index
        super().__init__(self.message)


class InputError(LmmSelectError):
    """Invalid data or configuration supplied by the caller."""
    exit_code = 2


class DimensionError(InputError):
    """Array shapes disagree."""


class NonFiniteError(InputError):
    """NaN or infinite entry in the data."""


class EmptyGroupError(InputError):
    """A group label in 1..n_groups has no observation."""


class SchemaError(InputError):
    """CSV input does not follow the expected schema."""


class ConstraintError(InputError):
    """A variance-masked component of theta is negative."""


class InvalidParameterError(InputError):
    """A scalar parameter is outside its admissible range."""


class BoundsError(InputError):
    """Box constraints are inconsistent or violated by the start point."""


class NumericalError(LmmSelectError):
    """The numerical procedure could not produce an answer."""
    exit_code = 3


class DegenerateFitError(NumericalError):
    """g(u~) = 0: perfect fit, profiled log-likelihood undefined."""


class OptimizationError(NumericalError):
    """The objective is not finite at the start point."""


class ConvergenceError(NumericalError):
    """No converged fit is available to choose from."""


__all__ = [
    'LmmSelectError',
    'InputError',
    'DimensionError',
    'NonFiniteError',
    'EmptyGroupError',
    'SchemaError',
    'ConstraintError',
    'InvalidParameterError',
    'BoundsError',
    'NumericalError',
    'DegenerateFitError',
    'OptimizationError',
    'ConvergenceError',
]
