"""capq: process capability indices for normal, non-normal, discrete and
multivariate processes."""

__version__ = "0.1.0"

from capq.errors import CapqError, ConfigError, DataError, DomainError, NumericError
from capq.kernels import BACKEND

__all__ = [
    "BACKEND",
    "CapqError",
    "ConfigError",
    "DataError",
    "DomainError",
    "NumericError",
    "__version__",
]
