"""Exception hierarchy shared by every obstack module."""


class ObstackError(Exception):
    """Base class for all library errors."""


class InvalidInputError(ObstackError, ValueError):
    """Input is non-finite, wrongly shaped, or outside its domain."""


class InvalidMetricError(InvalidInputError):
    """A metric matrix is not symmetric positive definite."""


class NumericError(ObstackError, ArithmeticError):
    """A numerical routine failed to converge or produced non-finite values.

    ``residual`` carries the last achieved convergence measure when one exists.
    """

    def __init__(self, message, residual=None, step=None):
        super().__init__(message)
        self.residual = residual
        self.step = step


class NumericCollapseError(NumericError):
    """All mixture weights underflowed to zero during a multiplicative update."""


class DegenerateFilterError(NumericError):
    """Every particle likelihood underflowed in a sequential Monte Carlo step."""


class ContractViolationError(ObstackError):
    """An operation received a trace or state it is not defined for."""


class ConfigError(ObstackError, ValueError):
    """An experiment configuration document failed validation."""
