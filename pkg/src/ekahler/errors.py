"""Exception hierarchy shared by all modules."""


class EKahlerError(Exception):
    """Base class for every error raised by the package."""


class InvalidInputError(EKahlerError, ValueError):
    """Arguments have the wrong shape, type or admissible value."""


class DomainError(EKahlerError, ValueError):
    """A point lies outside the chart domain."""


class DegenerateMetricError(EKahlerError, ArithmeticError):
    """The metric is singular or too badly conditioned to be trusted."""


class ResourceError(EKahlerError):
    """A request exceeds the desk-scale limits of the library."""


class FitUndefinedError(EKahlerError, ArithmeticError):
    """A least-squares fit has no meaningful answer (for example theta = 0)."""


class PreconditionError(EKahlerError):
    """A documented precondition of an operation does not hold."""
