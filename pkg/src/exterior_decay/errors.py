"""Exception hierarchy shared by every module."""


class ExteriorDecayError(Exception):
    """Base class for all package errors."""


class InvalidInputError(ExteriorDecayError, ValueError):
    pass


class HypothesisViolationError(ExteriorDecayError):
    """A structural condition of the problem is violated (e.g. q outside [0, 1])."""


class DomainViolationError(ExteriorDecayError):
    """m evaluated at U = u/t beyond the cap varsigma."""


class TailUnavailableError(ExteriorDecayError):
    """An integral over [t, +inf) cannot be evaluated or bounded."""


class QuadratureError(ExteriorDecayError):
    pass


class ConfigError(ExteriorDecayError):
    def __init__(self, message, path=None):
        self.path = path
        where = f" at '{path}'" if path else ""
        super().__init__(f"{message}{where}")
