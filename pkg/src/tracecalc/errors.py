"""Exception taxonomy shared across the package.

Computation errors map to CLI exit code 4; configuration and fixture
problems map to exit codes 2 and 3 (see ``tracecalc.cli``).
"""

from .expr import (  # re-exported: raised by expression evaluation
    NonDifferentiableError,
    SingularExpressionError,
    UnrepresentableCoreError,
)

__all__ = [
    "TraceCalcError",
    "DomainError",
    "SingularExpressionError",
    "UnrepresentableCoreError",
    "NonDifferentiableError",
    "InsufficientDecayError",
    "QuadratureFailureError",
    "IllConditionedFitError",
    "ResidualTooLargeError",
    "HigherOrderPoleError",
    "DimensionMismatchError",
    "DivergentIntegralError",
    "NonPositiveWeightError",
    "SingularMatrixError",
    "BandwidthError",
    "PathDisagreementError",
    "NotIdempotentError",
    "NotApproximateInverseError",
    "RouteDisagreementError",
    "LostTrackError",
    "NonHermitianError",
    "UnsupportedOrderError",
    "FixtureError",
    "ConfigError",
]


class TraceCalcError(Exception):
    """Base class for computation failures raised by this package."""


class DomainError(TraceCalcError):
    """Argument outside the operation's domain (e.g. x < 0)."""


class InsufficientDecayError(TraceCalcError):
    """Tail remainder does not decay fast enough to integrate."""


class QuadratureFailureError(TraceCalcError):
    """Adaptive quadrature failed to reach the requested accuracy."""


class IllConditionedFitError(TraceCalcError):
    """Least-squares design matrix condition number exceeds 1e12."""


class ResidualTooLargeError(TraceCalcError):
    """Tail fit residual above the acceptance threshold."""


class HigherOrderPoleError(TraceCalcError):
    """Sampled function violates the simple-pole contract."""


class DimensionMismatchError(TraceCalcError):
    """Operands have incompatible matrix size or parameter dimension."""


class DivergentIntegralError(TraceCalcError):
    """Absolutely convergent trace requested for a non-decaying element."""


class NonPositiveWeightError(TraceCalcError):
    """Reference weight is not pointwise positive definite."""


class SingularMatrixError(TraceCalcError):
    """Gauge transformation matrix is singular."""


class BandwidthError(TraceCalcError):
    """Circle-backend symbol bandwidth exceeds the mode truncation."""


class PathDisagreementError(TraceCalcError):
    """Independent computation paths disagree beyond tolerance."""


class NotIdempotentError(TraceCalcError):
    """Input fails the idempotency precondition or postcondition."""


class NotApproximateInverseError(TraceCalcError):
    """Products with the candidate inverse are not smoothing perturbations of 1."""


class RouteDisagreementError(TraceCalcError):
    """Index routes disagree beyond tolerance."""


class LostTrackError(TraceCalcError):
    """Winding-number argument step exceeded pi/2 (under-sampled loop)."""


class NonHermitianError(TraceCalcError):
    """Eta input matrix is not Hermitian."""


class UnsupportedOrderError(TraceCalcError):
    """Requested suspension order is outside the supported range."""


class FixtureError(TraceCalcError):
    """Referenced fixture is missing or malformed."""


class ConfigError(TraceCalcError):
    """Scenario configuration cannot be parsed."""
