"""Exception types shared across the package."""


class CavityVacError(Exception):
    """Base class for all package errors."""


class DomainError(CavityVacError, ValueError):
    """An argument lies outside the domain where a quantity is defined."""


class ConfigurationError(CavityVacError, ValueError):
    """Physical parameters are inconsistent or out of range.

    ``key`` names the offending parameter when known.
    """

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class ConvergenceError(CavityVacError, ArithmeticError):
    """A numerical procedure failed to reach its tolerance.

    ``diagnostics`` holds whatever the failing routine recorded
    (refinement history, tolerances, etc.).
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class FitError(CavityVacError, ValueError):
    """Not enough usable data to fit a power law."""


class NonFiniteResultError(CavityVacError, ArithmeticError):
    """A computed quantity came out infinite or NaN."""
