"""Exception hierarchy.  The CLI maps these onto exit codes."""


class CapqError(Exception):
    """Base class for every error raised deliberately by capq."""


class DomainError(CapqError, ValueError):
    """An input lies outside the domain where the quantity is defined."""


class ConfigError(CapqError, ValueError):
    """Invalid or inconsistent analysis configuration."""


class DataError(CapqError, ValueError):
    """Measurement file missing, unreadable or malformed."""


class NumericError(CapqError, ArithmeticError):
    """A numerical procedure failed (non-convergence, singular matrix, ...)."""
