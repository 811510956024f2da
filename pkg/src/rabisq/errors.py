"""Exception hierarchy.

Numeric failures (truncation, convergence, eigensolver) derive from
:class:`NumericError` so the CLI can map them to a single exit code.
"""


class RabisqError(Exception):
    pass


class ConfigError(RabisqError):
    pass


class InvalidParam(RabisqError, ValueError):
    pass


class UnstableParametric(InvalidParam):
    """Raised when g >= omega/2, where the dressed frequency is not real."""


class NumericError(RabisqError):
    pass


class TruncationTooSmall(NumericError):
    pass


class NonConvergent(NumericError):
    pass


class SeriesNotConverged(NumericError):
    pass


class QuadratureFailure(NumericError):
    pass


class EigensolverFailure(NumericError):
    pass


class DegenerateG(NumericError):
    """The closed-form expression is singular at g = 0; use the oracle path."""


class DegenerateDeltaTilde(NumericError):
    pass
