"""Exception hierarchy.

``ValidationError`` marks bad user input (CLI exit code 1) and
``NumericalError`` marks a computation that could not meet its accuracy
contract (exit code 2).
"""


class AjcirError(Exception):
    """Base class for all package errors."""


class ValidationError(AjcirError, ValueError):
    """Inputs violate a documented precondition."""


class DomainError(ValidationError):
    """A scalar argument lies outside the function's domain."""


class BranchError(ValidationError):
    """A complex argument has positive real part where Re <= 0 is required."""


class UnsupportedVariantError(ValidationError):
    """The Levy-measure variant does not support the requested operation."""


class MomentError(ValidationError):
    """The Levy measure lacks the moment the operation needs."""


class UnknownMomentError(ValidationError):
    """A jump descriptor does not declare the moment metadata needed."""


class NotSubcriticalError(ValidationError):
    """The drift matrix has an eigenvalue with nonnegative real part."""


class GridTooCoarseError(ValidationError):
    """A requested shift is smaller than the grid step."""


class NumericalError(AjcirError, ArithmeticError):
    """A numerical method failed to deliver its accuracy contract."""


class StepFailureError(NumericalError):
    """Adaptive integrator hit the minimum step size."""


class InvariantViolationError(NumericalError):
    """A solution left the region where it must stay (e.g. Re psi > 0)."""


class NonConvergenceError(NumericalError):
    """An iterative or tail-truncated computation did not converge."""


class TruncationError(NumericalError):
    """A Fourier integrand did not decay below the truncation threshold."""


class QuadratureError(NumericalError):
    """Adaptive quadrature did not meet its tolerance."""


class DegenerateFitError(NumericalError):
    """A regression was asked to fit degenerate (e.g. all-zero) data."""
