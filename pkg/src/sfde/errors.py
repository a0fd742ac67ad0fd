"""Exception types shared across the package.

Every error carries a short machine-readable ``code`` so that the command
line front end can map failures to stable exit statuses.
"""


class SfdeError(Exception):
    """Base class for all package errors."""

    code = "error"
    exit_status = 1

    def __init__(self, message="", **details):
        super().__init__(message)
        self.details = details


class ConfigError(SfdeError):
    code = "config-error"
    exit_status = 64


class UnsupportedParameterError(SfdeError):
    code = "unsupported-parameter"
    exit_status = 64


class ConditionError(SfdeError):
    code = "condition-failed"
    exit_status = 2


class DivergentIntegralError(SfdeError):
    code = "divergent-integral"
    exit_status = 3


class ResourceCapError(SfdeError):
    code = "resource-cap"
    exit_status = 4


class DegenerateResultError(SfdeError):
    code = "degenerate-probabilities"
    exit_status = 5


class AccuracyLossError(SfdeError):
    code = "accuracy-loss"


class QuadratureError(SfdeError):
    code = "quadrature-nonconvergence"


class PoleError(SfdeError):
    code = "pole-at-zero"


class CovarianceError(SfdeError):
    code = "covariance-not-psd"


class SingularConditioningError(SfdeError):
    code = "singular-conditioning"


class DomainError(SfdeError):
    code = "out-of-domain"


class InsufficientDataError(SfdeError):
    code = "insufficient-data"


class OverflowGuardError(SfdeError):
    code = "overflow-guard"
