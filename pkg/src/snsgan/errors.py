"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: configuration problems exit 1, data or
format problems exit 2, numeric failures exit 3.
"""


class SNSGANError(Exception):
    """Base class for every error raised by this package."""


class ShapeError(SNSGANError, ValueError):
    pass


class DomainError(SNSGANError, ValueError):
    pass


class NumericError(SNSGANError, ArithmeticError):
    pass


class ConfigError(SNSGANError, ValueError):
    pass


class FormatError(SNSGANError, ValueError):
    pass


class ConsistencyError(FormatError):
    pass


class MetricUnreliableError(SNSGANError):
    """The scoring classifier is too weak for its metrics to mean anything."""
