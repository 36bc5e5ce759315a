"""Online Bayesian stacking: combine online Bayesian models' predictive
densities with portfolio-selection algorithms.

Subpackages: :mod:`obstack.stackers` (weighting algorithms, BCRP, identity
checks), :mod:`obstack.models` (conjugate linear, RFF-GP, GARCH-SMC),
:mod:`obstack.harness` (experiments, reports, CLI). :mod:`obstack.simplex`
and :mod:`obstack.datagen` hold the simplex utilities and synthetic streams.
"""

from .errors import (ConfigError, ContractViolationError, DegenerateFilterError,
                     InvalidInputError, InvalidMetricError, NumericCollapseError, NumericError,
                     ObstackError)

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "ContractViolationError", "DegenerateFilterError", "InvalidInputError",
    "InvalidMetricError", "NumericCollapseError", "NumericError", "ObstackError", "__version__",
]
