# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled numerical kernels.

Same algorithms and signatures as ``capq._fallback``; see that module for
the reference versions.
"""

import numpy as np

from libc.math cimport (erfc, exp, log, log1p, lgamma, sqrt, fabs,
                        isnan, isinf, isfinite, INFINITY, NAN)

cdef double SQRT2 = sqrt(2.0)
cdef double SQRT2PI = sqrt(2.0 * 3.14159265358979323846)
cdef double EPS = 1e-16
cdef double FPMIN = 1e-300
cdef int MAXIT = 100000
cdef double P_LOW = 0.02425

cdef double[6] _A = [-3.969683028665376e+01, 2.209460984245205e+02,
                     -2.759285104469687e+02, 1.383577518672690e+02,
                     -3.066479806614716e+01, 2.506628277459239e+00]
cdef double[5] _B = [-5.447609879822406e+01, 1.615858368580409e+02,
                     -1.556989798598866e+02, 6.680131188771972e+01,
                     -1.328068155288572e+01]
cdef double[6] _C = [-7.784894002430293e-03, -3.223964580411365e-01,
                     -2.400758277161838e+00, -2.549732539343734e+00,
                     4.374664141464968e+00, 2.938163982698783e+00]
cdef double[4] _D = [7.784695709041462e-03, 3.224671290700398e-01,
                     2.445134137142996e+00, 3.754408661907416e+00]


cdef inline double _ndtr(double x) nogil:
    return 0.5 * erfc(-x / SQRT2)


cdef double _ndtri_lower(double p) nogil:
    cdef double q, r, x, e, u
    if p < P_LOW:
        q = sqrt(-2.0 * log(p))
        x = ((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
             / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    else:
        q = p - 0.5
        r = q * q
        x = ((((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
             / (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0))
    e = 0.5 * erfc(-x / SQRT2) - p
    u = e * SQRT2PI * exp(0.5 * x * x)
    if isfinite(u):
        x = x - u / (1.0 + 0.5 * x * u)
    return x


cdef double _ndtri(double p) nogil:
    if isnan(p) or p < 0.0 or p > 1.0:
        return NAN
    if p == 0.0:
        return -INFINITY
    if p == 1.0:
        return INFINITY
    if p == 0.5:
        return 0.0
    if p < 0.5:
        return _ndtri_lower(p)
    return -_ndtri_lower(1.0 - p)


cdef inline double _gamma_prefactor(double a, double x) nogil:
    return exp(-x + a * log(x) - lgamma(a))


cdef double _gamma_series(double a, double x) nogil:
    cdef double ap = a
    cdef double term = 1.0 / a
    cdef double total = term
    cdef int i
    for i in range(MAXIT):
        ap += 1.0
        term *= x / ap
        total += term
        if fabs(term) < fabs(total) * EPS:
            break
    return total * _gamma_prefactor(a, x)


cdef double _gamma_cfrac(double a, double x) nogil:
    cdef double b = x + 1.0 - a
    cdef double c = 1.0 / FPMIN
    cdef double d = 1.0 / b
    cdef double h = d
    cdef double an, delta
    cdef int i
    for i in range(1, MAXIT):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if fabs(d) < FPMIN:
            d = FPMIN
        c = b + an / c
        if fabs(c) < FPMIN:
            c = FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if fabs(delta - 1.0) < EPS:
            break
    return h * _gamma_prefactor(a, x)


cdef double _gammainc(double a, double x) nogil:
    if isnan(x):
        return NAN
    if x <= 0.0:
        return 0.0
    if isinf(x):
        return 1.0
    if x < a + 1.0:
        return _gamma_series(a, x)
    return 1.0 - _gamma_cfrac(a, x)


cdef double _gammaincc(double a, double x) nogil:
    if isnan(x):
        return NAN
    if x <= 0.0:
        return 1.0
    if isinf(x):
        return 0.0
    if x < a + 1.0:
        return 1.0 - _gamma_series(a, x)
    return _gamma_cfrac(a, x)


cdef double _beta_cfrac(double a, double b, double x) nogil:
    cdef double qab = a + b
    cdef double qap = a + 1.0
    cdef double qam = a - 1.0
    cdef double c = 1.0
    cdef double d = 1.0 - qab * x / qap
    cdef double h, aa, delta
    cdef int m, m2
    if fabs(d) < FPMIN:
        d = FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, MAXIT):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if fabs(d) < FPMIN:
            d = FPMIN
        c = 1.0 + aa / c
        if fabs(c) < FPMIN:
            c = FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if fabs(d) < FPMIN:
            d = FPMIN
        c = 1.0 + aa / c
        if fabs(c) < FPMIN:
            c = FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if fabs(delta - 1.0) < EPS:
            break
    return h


cdef double _betainc(double a, double b, double x) nogil:
    cdef double lbt, bt
    if isnan(x):
        return NAN
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    lbt = lgamma(a + b) - lgamma(a) - lgamma(b) + a * log(x) + b * log1p(-x)
    bt = exp(lbt)
    if x < (a + 1.0) / (a + b + 2.0):
        return bt * _beta_cfrac(a, b, x) / a
    return 1.0 - bt * _beta_cfrac(b, a, 1.0 - x) / b


def ndtr(x):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    out = np.empty(xv.shape[0], dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(xv.shape[0]):
            ov[i] = _ndtr(xv[i])
    return out


def ndtri(p):
    cdef const double[::1] pv = np.ascontiguousarray(p, dtype=np.float64)
    out = np.empty(pv.shape[0], dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(pv.shape[0]):
            ov[i] = _ndtri(pv[i])
    return out


def gammainc(double a, x):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    out = np.empty(xv.shape[0], dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(xv.shape[0]):
            ov[i] = _gammainc(a, xv[i])
    return out


def gammaincc(double a, x):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    out = np.empty(xv.shape[0], dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(xv.shape[0]):
            ov[i] = _gammaincc(a, xv[i])
    return out


def betainc(double a, double b, x):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    out = np.empty(xv.shape[0], dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(xv.shape[0]):
            ov[i] = _betainc(a, b, xv[i])
    return out


def scaled_max_abs(X, center, half_width):
    """Row-wise ``max_i |X[j, i] - center[i]| / half_width[i]``."""
    cdef const double[:, ::1] xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[::1] cv = np.ascontiguousarray(center, dtype=np.float64)
    cdef const double[::1] hv = np.ascontiguousarray(half_width, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], v = xv.shape[1], j, i
    if cv.shape[0] != v or hv.shape[0] != v:
        raise ValueError("center/half_width length does not match column count")
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    cdef double best, z
    with nogil:
        for j in range(n):
            best = -INFINITY
            for i in range(v):
                z = fabs(xv[j, i] - cv[i]) / hv[i]
                if z > best:
                    best = z
            ov[j] = best
    return out


def fraction_le(values, double threshold):
    cdef const double[::1] vv = np.ascontiguousarray(values, dtype=np.float64)
    cdef Py_ssize_t n = vv.shape[0], i, count = 0
    if n == 0:
        return NAN
    with nogil:
        for i in range(n):
            if vv[i] <= threshold:
                count += 1
    return count / <double>n


def resample_mean_sd(values, idx):
    """Mean and n-1 standard deviation of ``values[idx[b]]`` for every row b."""
    cdef const double[::1] xv = np.ascontiguousarray(values, dtype=np.float64)
    cdef const long long[:, ::1] iv = np.ascontiguousarray(idx, dtype=np.int64)
    cdef Py_ssize_t B = iv.shape[0], n = iv.shape[1], b, j, k
    cdef Py_ssize_t size = xv.shape[0]
    means = np.empty(B, dtype=np.float64)
    sds = np.empty(B, dtype=np.float64)
    cdef double[::1] mv = means
    cdef double[::1] sv = sds
    cdef double s, m, dev, ss
    for b in range(B):
        for j in range(n):
            k = iv[b, j]
            if k < 0 or k >= size:
                raise IndexError("resample index out of range")
    with nogil:
        for b in range(B):
            s = 0.0
            for j in range(n):
                s += xv[iv[b, j]]
            m = s / n
            ss = 0.0
            for j in range(n):
                dev = xv[iv[b, j]] - m
                ss += dev * dev
            mv[b] = m
            if n > 1:
                sv[b] = sqrt(ss / (n - 1))
            else:
                sv[b] = NAN
    return means, sds
