"""Exception hierarchy shared across the package."""


class CovDenoiseError(Exception):
    """Base class for all package errors."""


class ParameterError(CovDenoiseError, ValueError):
    """Invalid argument or configuration value."""


class DataError(CovDenoiseError, ValueError):
    """Malformed or degenerate input data (parse errors, bad panels)."""


class WeightsFormatError(DataError):
    """Weights file has an unknown magic/version or inconsistent layout."""


class ChecksumError(WeightsFormatError):
    """Weights file failed its integrity check."""


class NumericError(CovDenoiseError, ArithmeticError):
    """Numerical failure: non-finite values, domain violations, divergence."""


class SingularMatrixError(NumericError):
    """A matrix that must be invertible is singular; names the argument."""


class SolverError(NumericError):
    """Iterative solver failed to converge within its iteration cap."""
