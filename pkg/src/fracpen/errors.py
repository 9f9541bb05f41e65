"""Exception hierarchy shared by all modules."""


class FracPenError(Exception):
    """Base class for errors raised by fracpen."""


class ParameterDomainError(FracPenError, ValueError):
    """A scalar parameter lies outside its admissible range."""


class InputError(FracPenError, ValueError):
    """An input field is malformed (wrong shape, NaN/Inf, identically zero, ...)."""


class DomainError(FracPenError, ValueError):
    """An evaluation point lies outside the computational box."""


class ConfigurationError(FracPenError, ValueError):
    """A model, potential or experiment configuration is inconsistent."""


class ExtentError(FracPenError, ValueError):
    """A rescaling would push significant mass outside the grid."""


class NumericalIntegrationError(FracPenError, RuntimeError):
    """Adaptive quadrature did not reach the requested accuracy."""


class ProjectionError(FracPenError, RuntimeError):
    """The Nehari fibering map has no sign change on the search bracket."""


class SolverError(FracPenError, RuntimeError):
    """A critical-point solve failed in a way that cannot be flagged and returned."""


class TrivialSolutionError(SolverError):
    """The descent collapsed onto the zero critical point."""


class TruncationError(FracPenError, ValueError):
    """A field is not small enough at the box boundary for the requested check."""


class InsufficientDataError(FracPenError, ValueError):
    """A report needs more entries than it was given."""


class ConditionFailure(FracPenError, ValueError):
    """A named structural condition on a nonlinearity failed."""

    def __init__(self, condition, offenders, message=None):
        self.condition = condition
        self.offenders = list(offenders)
        super().__init__(message or f"condition {condition} violated at t={self.offenders[:5]}")


class PreconditionWarning(UserWarning):
    """Input violates a soft precondition; the result is computed but suspect."""
