"""Exception hierarchy shared across the package."""


class IvSensaError(Exception):
    """Base class for all errors raised by iv_sensa."""


class InvalidInputError(IvSensaError, ValueError):
    """Input values are non-finite, out of range, or outside a declared support."""


class DimensionMismatchError(InvalidInputError):
    """Array shapes in a linear program or table do not agree."""


class InvalidParameterError(InvalidInputError):
    """A sensitivity parameter or configuration value is out of range."""


class FormMismatchError(InvalidInputError):
    """A constraint form was requested for supports it cannot represent."""


class EstimationError(IvSensaError):
    """A distribution or density could not be estimated from the data."""


class DegenerateOutcomeError(EstimationError):
    """The outcome is constant, so it cannot be discretized or rescaled."""


class BuildError(IvSensaError):
    """A sieve program could not be assembled from its inputs."""


class SolverError(IvSensaError, RuntimeError):
    """The simplex solver hit its iteration cap or an unexpected state."""
