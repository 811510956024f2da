"""Qubit-oscillator Rabi model with a parametric term: GRWA spectrum,
dynamics, Husimi Q-function and quadrature squeezing, plus exact
truncated-Fock-space references."""

from rabisq.errors import (
    ConfigError,
    DegenerateDeltaTilde,
    DegenerateG,
    EigensolverFailure,
    InvalidParam,
    NonConvergent,
    NumericError,
    QuadratureFailure,
    RabisqError,
    SeriesNotConverged,
    TruncationTooSmall,
    UnstableParametric,
)
from rabisq.model import DerivedParams, ModelParams, derive, validate

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DegenerateDeltaTilde",
    "DegenerateG",
    "DerivedParams",
    "EigensolverFailure",
    "InvalidParam",
    "ModelParams",
    "NonConvergent",
    "NumericError",
    "QuadratureFailure",
    "RabisqError",
    "SeriesNotConverged",
    "TruncationTooSmall",
    "UnstableParametric",
    "derive",
    "validate",
]
