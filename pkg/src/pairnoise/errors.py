"""Exception hierarchy shared by all pairnoise modules.

The CLI maps these onto exit codes: configuration problems exit 2,
numerical/model problems exit 3, and I/O problems (plain ``OSError``)
exit 4.
"""

from __future__ import annotations


class PairNoiseError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(PairNoiseError):
    """Invalid configuration: bad parameter values, inconsistent bands, ..."""


class SchemaError(ConfigError):
    """Malformed config/CSV input; message names the offending field."""


class DomainError(PairNoiseError):
    """Special-function argument outside the supported domain."""


class EvaluationError(PairNoiseError):
    """An integrand or intermediate quantity evaluated to a non-finite value."""


class UndefinedStatisticError(PairNoiseError):
    """A normalized statistic has a vanishing/negative denominator."""


class NumericalConsistencyError(PairNoiseError):
    """An internal consistency theorem was violated beyond roundoff (a bug)."""


class ModelViolationError(PairNoiseError):
    """Inputs violate a model-level requirement (e.g. non-PSD covariance)."""


class InputError(PairNoiseError):
    """Mismatched or incompatible data passed to a library operation."""


class ConvergenceError(PairNoiseError):
    """An iterative fit failed to converge; carries the best result so far."""

    def __init__(self, message: str, best_model=None, report=None):
        super().__init__(message)
        self.best_model = best_model
        self.report = report


class IdentifiabilityError(PairNoiseError):
    """The data cannot constrain the requested parameters at all."""


class ModelValidityWarning(UserWarning):
    """The model is being evaluated outside its stated validity regime."""
