"""Pure-Python implementations of the numerical kernels.

Used when the compiled ``_speedups`` extension is unavailable, or when
``CAPQ_PURE_PYTHON`` is set.  Every function here has an identically named
counterpart in ``_speedups.pyx`` and both follow the same algorithms, so the
two backends agree to a few ulps.
"""

import math

import numpy as np

SQRT2 = math.sqrt(2.0)
SQRT2PI = math.sqrt(2.0 * math.pi)
EPS = 1e-16
FPMIN = 1e-300
MAXIT = 100000

# Acklam's rational approximation for the normal quantile (rel. error ~1.2e-9)
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
P_LOW = 0.02425


def _ndtr(x):
    return 0.5 * math.erfc(-x / SQRT2)


def _ndtri_lower(p):
    # 0 < p <= 0.5
    if p < P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        x = ((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
             / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    else:
        q = p - 0.5
        r = q * q
        x = ((((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
             / (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0))
    # one Halley step against the exact CDF
    e = 0.5 * math.erfc(-x / SQRT2) - p
    u = e * SQRT2PI * math.exp(0.5 * x * x)
    if math.isfinite(u):
        x = x - u / (1.0 + 0.5 * x * u)
    return x


def _ndtri(p):
    if math.isnan(p) or p < 0.0 or p > 1.0:
        return math.nan
    if p == 0.0:
        return -math.inf
    if p == 1.0:
        return math.inf
    if p == 0.5:
        return 0.0
    if p < 0.5:
        return _ndtri_lower(p)
    return -_ndtri_lower(1.0 - p)


def _gamma_prefactor(a, x):
    return math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_series(a, x):
    ap = a
    term = total = 1.0 / a
    for _ in range(MAXIT):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * EPS:
            break
    return total * _gamma_prefactor(a, x)


def _gamma_cfrac(a, x):
    # modified Lentz for the upper tail Q(a, x)
    b = x + 1.0 - a
    c = 1.0 / FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, MAXIT):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < FPMIN:
            d = FPMIN
        c = b + an / c
        if abs(c) < FPMIN:
            c = FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < EPS:
            break
    return h * _gamma_prefactor(a, x)


def _gammainc(a, x):
    if math.isnan(x):
        return math.nan
    if x <= 0.0:
        return 0.0
    if math.isinf(x):
        return 1.0
    if x < a + 1.0:
        return _gamma_series(a, x)
    return 1.0 - _gamma_cfrac(a, x)


def _gammaincc(a, x):
    if math.isnan(x):
        return math.nan
    if x <= 0.0:
        return 1.0
    if math.isinf(x):
        return 0.0
    if x < a + 1.0:
        return 1.0 - _gamma_series(a, x)
    return _gamma_cfrac(a, x)


def _beta_cfrac(a, b, x):
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < FPMIN:
        d = FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, MAXIT):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < FPMIN:
            d = FPMIN
        c = 1.0 + aa / c
        if abs(c) < FPMIN:
            c = FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < FPMIN:
            d = FPMIN
        c = 1.0 + aa / c
        if abs(c) < FPMIN:
            c = FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < EPS:
            break
    return h


def _betainc(a, b, x):
    if math.isnan(x):
        return math.nan
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    lbt = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
           + a * math.log(x) + b * math.log1p(-x))
    bt = math.exp(lbt)
    if x < (a + 1.0) / (a + b + 2.0):
        return bt * _beta_cfrac(a, b, x) / a
    return 1.0 - bt * _beta_cfrac(b, a, 1.0 - x) / b


def ndtr(x):
    x = np.ascontiguousarray(x, dtype=np.float64)
    return np.array([_ndtr(v) for v in x.tolist()], dtype=np.float64)


def ndtri(p):
    p = np.ascontiguousarray(p, dtype=np.float64)
    return np.array([_ndtri(v) for v in p.tolist()], dtype=np.float64)


def gammainc(a, x):
    x = np.ascontiguousarray(x, dtype=np.float64)
    a = float(a)
    return np.array([_gammainc(a, v) for v in x.tolist()], dtype=np.float64)


def gammaincc(a, x):
    x = np.ascontiguousarray(x, dtype=np.float64)
    a = float(a)
    return np.array([_gammaincc(a, v) for v in x.tolist()], dtype=np.float64)


def betainc(a, b, x):
    x = np.ascontiguousarray(x, dtype=np.float64)
    a, b = float(a), float(b)
    return np.array([_betainc(a, b, v) for v in x.tolist()], dtype=np.float64)


def scaled_max_abs(X, center, half_width):
    """Row-wise ``max_i |X[j, i] - center[i]| / half_width[i]``."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    center = np.ascontiguousarray(center, dtype=np.float64)
    half_width = np.ascontiguousarray(half_width, dtype=np.float64)
    return np.max(np.abs(X - center) / half_width, axis=1)


def fraction_le(values, threshold):
    values = np.ascontiguousarray(values, dtype=np.float64)
    if values.size == 0:
        return math.nan
    return np.count_nonzero(values <= threshold) / values.size


def resample_mean_sd(values, idx):
    """Mean and n-1 standard deviation of ``values[idx[b]]`` for every row b."""
    values = np.ascontiguousarray(values, dtype=np.float64)
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    draws = values[idx]
    return draws.mean(axis=1), draws.std(axis=1, ddof=1)
