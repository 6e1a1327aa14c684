"""Exception types shared across the package.

The CLI maps these onto exit codes: parameter and contract problems exit
with 1, data problems with 2, numerical faults with 3.
"""


class MemarbError(Exception):
    """Base class for all package errors."""


class ParameterError(MemarbError, ValueError):
    """An argument is outside its allowed range."""


class ContractViolation(ParameterError):
    """Inputs disagree on shape or dimension."""


class ThresholdTooHigh(ParameterError):
    """A weight threshold removed every asset."""


class DataError(MemarbError, ValueError):
    """Input data is malformed or unusable."""


class DegenerateSeries(DataError):
    """A series has no variation (all-zero changes)."""


class NumericalFault(MemarbError, ArithmeticError):
    """Non-finite values or a solver that failed to converge."""
