"""Decaying radial super-solutions of exterior semilinear elliptic problems,
built from the fixed point of a logarithmic-derivative integral operator."""

from .errors import (
    ConfigError,
    DomainViolationError,
    ExteriorDecayError,
    HypothesisViolationError,
    InvalidInputError,
    QuadratureError,
    TailUnavailableError,
)
from .problem_model import GammaSpec, ProblemSpec

__all__ = [
    "ConfigError",
    "DomainViolationError",
    "ExteriorDecayError",
    "GammaSpec",
    "HypothesisViolationError",
    "InvalidInputError",
    "ProblemSpec",
    "QuadratureError",
    "TailUnavailableError",
]
__version__ = "0.1.0"
