"""Kernel backend selection.

The compiled ``_speedups`` module is used when it imports cleanly; otherwise
(or when the ``CAPQ_PURE_PYTHON`` environment variable is set to a non-empty
value) the pure-Python ``_fallback`` module is used.  ``BACKEND`` names the
active choice.

The wrappers below accept scalars or arrays of any shape and return the same
shape (a Python float for scalar input).
"""

import os

import numpy as np

from capq import _fallback

if os.environ.get("CAPQ_PURE_PYTHON"):
    _impl = _fallback
else:
    try:
        from capq import _speedups as _impl
    except ImportError:
        _impl = _fallback

BACKEND = "python" if _impl is _fallback else "cython"


def available_backends():
    """Map backend name to kernel module for every importable backend."""
    found = {"python": _fallback}
    try:
        from capq import _speedups
    except ImportError:
        pass
    else:
        found["cython"] = _speedups
    return found


def _elementwise(fn, x, *params):
    arr = np.asarray(x, dtype=np.float64)
    out = fn(*params, arr.ravel())
    if arr.ndim == 0:
        return float(out[0])
    return out.reshape(arr.shape)


def norm_cdf(x):
    """Standard normal CDF."""
    return _elementwise(_impl.ndtr, x)


def norm_sf(x):
    """Standard normal survival function, accurate in the upper tail."""
    return _elementwise(_impl.ndtr, -np.asarray(x, dtype=np.float64))


def norm_ppf(p):
    """Standard normal quantile; -inf/inf at 0/1 and nan outside [0, 1]."""
    return _elementwise(_impl.ndtri, p)


def norm_isf(q):
    """Inverse survival function: x with P(Z > x) = q."""
    return -_elementwise(_impl.ndtri, q)


def gammainc(a, x):
    """Regularized lower incomplete gamma P(a, x)."""
    return _elementwise(_impl.gammainc, x, float(a))


def gammaincc(a, x):
    """Regularized upper incomplete gamma Q(a, x)."""
    return _elementwise(_impl.gammaincc, x, float(a))


def betainc(a, b, x):
    """Regularized incomplete beta I_x(a, b)."""
    return _elementwise(_impl.betainc, x, float(a), float(b))


def scaled_max_abs(X, center, half_width):
    return _impl.scaled_max_abs(X, center, half_width)


def fraction_le(values, threshold):
    return _impl.fraction_le(values, float(threshold))


def resample_mean_sd(values, idx):
    return _impl.resample_mean_sd(values, idx)
