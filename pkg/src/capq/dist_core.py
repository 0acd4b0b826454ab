"""Univariate process models and auxiliary distributions.

Every model exposes the same duck-typed surface used by the index modules:
``cdf``, ``sf``, ``cdf_left`` (P(X < x)), ``density``, ``quantile``,
``mean``, ``sd``, ``median`` and ``sample``.  Continuous families use the
closed forms or the incomplete gamma/beta kernels; quantiles without a closed
form are obtained by bisection on whichever tail is more accurate.

Discrete families (and the empirical model) use the convention
``quantile(u) = inf{x : F(x) >= u}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from capq import kernels
from capq.errors import DomainError

_EPS = 2.220446049250313e-16

FAMILIES = ("normal", "lognormal", "weibull", "gamma", "uniform", "exponential",
            "poisson", "binomial", "empirical")


class Moments(NamedTuple):
    mean: float
    sd: float
    median: float


def _check_u(u):
    u = np.asarray(u, dtype=np.float64)
    if np.any(~(u > 0.0) | ~(u < 1.0)):
        raise DomainError(f"quantile level must lie in (0, 1), got {u.tolist()}")
    return u


def _positive(name, value):
    value = float(value)
    if not (math.isfinite(value) and value > 0.0):
        raise DomainError(f"{name} must be finite and > 0, got {value}")
    return value


def _finite(name, value):
    value = float(value)
    if not math.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value}")
    return value


def _bisect_increasing(fn, target, lo, hi, maxiter=400):
    """Smallest-bracket root of an increasing scalar function by bisection."""
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if fn(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * max(abs(lo), abs(hi)):
            break
    return 0.5 * (lo + hi)


def invert_tails(cdf, sf, u, lower, upper):
    """Solve F(x) = u for a continuous distribution on [lower, upper).

    The lower tail is matched through ``cdf`` when u <= 1/2 and the upper tail
    through ``sf`` otherwise, so that extreme levels keep full relative
    precision.  ``upper`` may be infinite; a finite bracket is found by
    doubling.
    """
    lo = lower
    if math.isinf(lo):
        lo = -1.0
        while cdf(lo) > u:
            lo *= 2.0
    hi = upper
    if math.isinf(hi):
        hi = max(1.0, 2.0 * abs(lo))
        while sf(hi) > 1.0 - u:
            hi *= 2.0
    if u <= 0.5:
        return _bisect_increasing(cdf, u, lo, hi)
    return _bisect_increasing(lambda x: -sf(x), -(1.0 - u), lo, hi)


class ProcessModel:
    """Base class for univariate process distributions.

    Build instances through the family constructors, e.g.
    ``ProcessModel.normal(20.0, 3.0)`` or ``ProcessModel.empirical(values)``.
    """

    family = ""
    kind = "continuous"

    # -- constructors ---------------------------------------------------
    @staticmethod
    def normal(mu=0.0, sigma=1.0):
        return NormalModel(mu, sigma)

    @staticmethod
    def lognormal(logmean=0.0, logsd=1.0):
        return LognormalModel(logmean, logsd)

    @staticmethod
    def weibull(shape, scale=1.0):
        return WeibullModel(shape, scale)

    @staticmethod
    def gamma(shape, scale=1.0):
        return GammaModel(shape, scale)

    @staticmethod
    def uniform(a=0.0, b=1.0):
        return UniformModel(a, b)

    @staticmethod
    def exponential(rate=1.0):
        return ExponentialModel(rate)

    @staticmethod
    def poisson(lam):
        return PoissonModel(lam)

    @staticmethod
    def binomial(trials, prob):
        return BinomialModel(trials, prob)

    @staticmethod
    def empirical(values, interpolate=False):
        return EmpiricalModel(values, interpolate)

    @staticmethod
    def from_spec(family, params):
        """Build a model from a family name and a parameter mapping."""
        if family not in _CONSTRUCTORS:
            raise DomainError(f"unknown family {family!r}; expected one of {sorted(_CONSTRUCTORS)}")
        try:
            return _CONSTRUCTORS[family](**params)
        except TypeError as exc:
            raise DomainError(f"bad parameters for {family}: {exc}") from None

    # -- shared behaviour ----------------------------------------------
    @property
    def params(self):
        raise NotImplementedError

    def cdf_left(self, x):
        """P(X < x).  Equal to the CDF for continuous models."""
        return self.cdf(x)

    def median(self):
        return self.quantile(0.5)

    def moments(self):
        return Moments(self.mean(), self.sd(), self.median())

    def sample(self, n, seed=None):
        """Draw ``n`` i.i.d. values.  ``seed`` may be an int or a Generator."""
        n = int(n)
        if n < 1:
            raise DomainError(f"sample size must be >= 1, got {n}")
        return self._draw(np.random.default_rng(seed), n)

    def to_dict(self):
        return {"family": self.family, "params": dict(self.params)}

    def __eq__(self, other):
        return type(self) is type(other) and self.params == other.params

    def __hash__(self):
        return hash((self.family, tuple(sorted(self.params.items()))))

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{type(self).__name__}({args})"


class _ClosedForm(ProcessModel):
    """Continuous family; subclasses supply ``_cdf``/``_sf``/``_ppf`` on arrays."""

    support = (-math.inf, math.inf)

    def cdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        out = np.clip(self._cdf(x), 0.0, 1.0)
        return float(out) if out.ndim == 0 else out

    def sf(self, x):
        x = np.asarray(x, dtype=np.float64)
        out = np.clip(self._sf(x), 0.0, 1.0)
        return float(out) if out.ndim == 0 else out

    def density(self, x):
        x = np.asarray(x, dtype=np.float64)
        out = self._pdf(x)
        return float(out) if out.ndim == 0 else out

    def quantile(self, u):
        u = _check_u(u)
        out = np.asarray(self._ppf(u), dtype=np.float64)
        return float(out) if out.ndim == 0 else out


class NormalModel(_ClosedForm):
    family = "normal"

    def __init__(self, mu=0.0, sigma=1.0):
        self.mu = _finite("mu", mu)
        self.sigma = _positive("sigma", sigma)

    @property
    def params(self):
        return {"mu": self.mu, "sigma": self.sigma}

    def _cdf(self, x):
        return kernels.norm_cdf((x - self.mu) / self.sigma)

    def _sf(self, x):
        return kernels.norm_sf((x - self.mu) / self.sigma)

    def _pdf(self, x):
        z = (x - self.mu) / self.sigma
        return np.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2.0 * math.pi))

    def _ppf(self, u):
        return self.mu + self.sigma * kernels.norm_ppf(u)

    def mean(self):
        return self.mu

    def sd(self):
        return self.sigma

    def median(self):
        return self.mu

    def _draw(self, rng, n):
        return rng.normal(self.mu, self.sigma, n)


class LognormalModel(_ClosedForm):
    family = "lognormal"
    support = (0.0, math.inf)

    def __init__(self, logmean=0.0, logsd=1.0):
        self.logmean = _finite("logmean", logmean)
        self.logsd = _positive("logsd", logsd)

    @property
    def params(self):
        return {"logmean": self.logmean, "logsd": self.logsd}

    def _z(self, x):
        with np.errstate(divide="ignore", invalid="ignore"):
            return (np.log(np.where(x > 0, x, np.nan)) - self.logmean) / self.logsd

    def _cdf(self, x):
        return np.where(x > 0, kernels.norm_cdf(np.nan_to_num(self._z(x))), 0.0)

    def _sf(self, x):
        return np.where(x > 0, kernels.norm_sf(np.nan_to_num(self._z(x))), 1.0)

    def _pdf(self, x):
        z = np.nan_to_num(self._z(x))
        with np.errstate(divide="ignore", invalid="ignore"):
            dens = np.exp(-0.5 * z * z) / (np.where(x > 0, x, 1.0) * self.logsd * math.sqrt(2 * math.pi))
        return np.where(x > 0, dens, 0.0)

    def _ppf(self, u):
        return np.exp(self.logmean + self.logsd * kernels.norm_ppf(u))

    def mean(self):
        return math.exp(self.logmean + 0.5 * self.logsd ** 2)

    def sd(self):
        s2 = self.logsd ** 2
        return math.sqrt(math.expm1(s2) * math.exp(2 * self.logmean + s2))

    def median(self):
        return math.exp(self.logmean)

    def _draw(self, rng, n):
        return rng.lognormal(self.logmean, self.logsd, n)


class WeibullModel(_ClosedForm):
    family = "weibull"
    support = (0.0, math.inf)

    def __init__(self, shape, scale=1.0):
        self.shape = _positive("shape", shape)
        self.scale = _positive("scale", scale)

    @property
    def params(self):
        return {"shape": self.shape, "scale": self.scale}

    def _h(self, x):
        return np.power(np.maximum(x, 0.0) / self.scale, self.shape)

    def _cdf(self, x):
        return -np.expm1(-self._h(x))

    def _sf(self, x):
        return np.exp(-self._h(x))

    def _pdf(self, x):
        xs = np.maximum(x, 0.0) / self.scale
        with np.errstate(divide="ignore", invalid="ignore"):
            dens = self.shape / self.scale * np.power(xs, self.shape - 1.0) * np.exp(-np.power(xs, self.shape))
        return np.where(x >= 0, dens, 0.0)

    def _ppf(self, u):
        return self.scale * np.power(-np.log1p(-u), 1.0 / self.shape)

    def mean(self):
        return self.scale * math.gamma(1.0 + 1.0 / self.shape)

    def sd(self):
        g1 = math.gamma(1.0 + 1.0 / self.shape)
        g2 = math.gamma(1.0 + 2.0 / self.shape)
        return self.scale * math.sqrt(g2 - g1 * g1)

    def _draw(self, rng, n):
        return self.scale * rng.weibull(self.shape, n)


class GammaModel(_ClosedForm):
    family = "gamma"
    support = (0.0, math.inf)

    def __init__(self, shape, scale=1.0):
        self.shape = _positive("shape", shape)
        self.scale = _positive("scale", scale)

    @property
    def params(self):
        return {"shape": self.shape, "scale": self.scale}

    def _cdf(self, x):
        return kernels.gammainc(self.shape, np.maximum(x, 0.0) / self.scale)

    def _sf(self, x):
        return kernels.gammaincc(self.shape, np.maximum(x, 0.0) / self.scale)

    def _pdf(self, x):
        xs = np.maximum(x, 0.0) / self.scale
        with np.errstate(divide="ignore", invalid="ignore"):
            logd = (self.shape - 1.0) * np.log(xs) - xs - math.lgamma(self.shape) - math.log(self.scale)
        return np.where(x > 0, np.exp(logd), 0.0)

    def _ppf(self, u):
        cdf = lambda x: kernels.gammainc(self.shape, x)  # noqa: E731
        sf = lambda x: kernels.gammaincc(self.shape, x)  # noqa: E731
        out = [self.scale * invert_tails(cdf, sf, float(v), 0.0, math.inf) for v in np.ravel(u)]
        return np.reshape(out, np.shape(u))

    def mean(self):
        return self.shape * self.scale

    def sd(self):
        return math.sqrt(self.shape) * self.scale

    def _draw(self, rng, n):
        return rng.gamma(self.shape, self.scale, n)


class UniformModel(_ClosedForm):
    family = "uniform"

    def __init__(self, a=0.0, b=1.0):
        self.a = _finite("a", a)
        self.b = _finite("b", b)
        if not self.a < self.b:
            raise DomainError(f"uniform requires a < b, got a={self.a}, b={self.b}")

    @property
    def params(self):
        return {"a": self.a, "b": self.b}

    @property
    def support(self):
        return (self.a, self.b)

    def cdf_linear(self, x):
        """The CDF's linear piece extended beyond (a, b), without clamping."""
        return (np.asarray(x, dtype=np.float64) - self.a) / (self.b - self.a)

    def _cdf(self, x):
        return (x - self.a) / (self.b - self.a)

    def _sf(self, x):
        return (self.b - x) / (self.b - self.a)

    def _pdf(self, x):
        return np.where((x >= self.a) & (x <= self.b), 1.0 / (self.b - self.a), 0.0)

    def _ppf(self, u):
        return self.a + u * (self.b - self.a)

    def mean(self):
        return 0.5 * (self.a + self.b)

    def sd(self):
        return (self.b - self.a) / math.sqrt(12.0)

    def median(self):
        return 0.5 * (self.a + self.b)

    def _draw(self, rng, n):
        return rng.uniform(self.a, self.b, n)


class ExponentialModel(_ClosedForm):
    family = "exponential"
    support = (0.0, math.inf)

    def __init__(self, rate=1.0):
        self.rate = _positive("rate", rate)

    @property
    def params(self):
        return {"rate": self.rate}

    def _cdf(self, x):
        return -np.expm1(-self.rate * np.maximum(x, 0.0))

    def _sf(self, x):
        return np.exp(-self.rate * np.maximum(x, 0.0))

    def _pdf(self, x):
        return np.where(x >= 0, self.rate * np.exp(-self.rate * np.maximum(x, 0.0)), 0.0)

    def _ppf(self, u):
        return -np.log1p(-u) / self.rate

    def mean(self):
        return 1.0 / self.rate

    def sd(self):
        return 1.0 / self.rate

    def _draw(self, rng, n):
        return rng.exponential(1.0 / self.rate, n)


class _Discrete(ProcessModel):
    """Integer-supported family; subclasses supply scalar ``_cdf_int``/``_sf_int``."""

    kind = "discrete"

    def _map(self, fn, x):
        x = np.asarray(x, dtype=np.float64)
        out = np.array([fn(v) for v in np.ravel(x)], dtype=np.float64).reshape(x.shape)
        return float(out) if out.ndim == 0 else out

    def cdf(self, x):
        return self._map(lambda v: self._cdf_int(math.floor(v)) if math.isfinite(v) else float(v > 0), x)

    def sf(self, x):
        return self._map(lambda v: self._sf_int(math.floor(v)) if math.isfinite(v) else float(v < 0), x)

    def cdf_left(self, x):
        return self._map(lambda v: self._cdf_int(math.ceil(v) - 1) if math.isfinite(v) else float(v > 0), x)

    def density(self, x):
        def pmf(v):
            if not (math.isfinite(v) and v == math.floor(v)):
                return 0.0
            return self._pmf_int(int(v))
        return self._map(pmf, x)

    def _quantile_scalar(self, u):
        # a few ulps of slack so that u = F(k) exactly still returns k
        u = u * (1.0 - 8.0 * _EPS)
        k = max(0, int(math.floor(self.mean() + self.sd() * float(kernels.norm_ppf(u)))))
        while k > 0 and self._cdf_int(k - 1) >= u:
            k -= 1
        while self._cdf_int(k) < u:
            k += 1
        return float(k)

    def quantile(self, u):
        u = _check_u(u)
        out = np.array([self._quantile_scalar(float(v)) for v in np.ravel(u)]).reshape(u.shape)
        return float(out) if out.ndim == 0 else out


class PoissonModel(_Discrete):
    family = "poisson"

    def __init__(self, lam):
        self.lam = _positive("lam", lam)

    @property
    def params(self):
        return {"lam": self.lam}

    @property
    def support(self):
        return (0.0, math.inf)

    def _cdf_int(self, k):
        if k < 0:
            return 0.0
        return kernels.gammaincc(k + 1.0, self.lam)

    def _sf_int(self, k):
        if k < 0:
            return 1.0
        return kernels.gammainc(k + 1.0, self.lam)

    def _pmf_int(self, k):
        if k < 0:
            return 0.0
        return math.exp(k * math.log(self.lam) - self.lam - math.lgamma(k + 1.0))

    def mean(self):
        return self.lam

    def sd(self):
        return math.sqrt(self.lam)

    def _draw(self, rng, n):
        return rng.poisson(self.lam, n).astype(np.float64)


class BinomialModel(_Discrete):
    family = "binomial"

    def __init__(self, trials, prob):
        if int(trials) != trials or trials < 1:
            raise DomainError(f"binomial trials must be an integer >= 1, got {trials}")
        prob = float(prob)
        if not 0.0 <= prob <= 1.0:
            raise DomainError(f"binomial prob must lie in [0, 1], got {prob}")
        self.trials = int(trials)
        self.prob = prob

    @property
    def params(self):
        return {"trials": self.trials, "prob": self.prob}

    @property
    def support(self):
        return (0.0, float(self.trials))

    def _cdf_int(self, k):
        if k < 0:
            return 0.0
        if k >= self.trials:
            return 1.0
        return kernels.betainc(self.trials - k, k + 1.0, 1.0 - self.prob)

    def _sf_int(self, k):
        if k < 0:
            return 1.0
        if k >= self.trials:
            return 0.0
        return kernels.betainc(k + 1.0, self.trials - k, self.prob)

    def _pmf_int(self, k):
        if k < 0 or k > self.trials:
            return 0.0
        if self.prob in (0.0, 1.0):
            return float(k == (0 if self.prob == 0.0 else self.trials))
        n = self.trials
        return math.exp(math.lgamma(n + 1.0) - math.lgamma(k + 1.0) - math.lgamma(n - k + 1.0)
                        + k * math.log(self.prob) + (n - k) * math.log1p(-self.prob))

    def mean(self):
        return self.trials * self.prob

    def sd(self):
        return math.sqrt(self.trials * self.prob * (1.0 - self.prob))

    def _quantile_scalar(self, u):
        return min(super()._quantile_scalar(u), float(self.trials))

    def _draw(self, rng, n):
        return rng.binomial(self.trials, self.prob, n).astype(np.float64)


class EmpiricalModel(ProcessModel):
    """Step empirical CDF of an observed sample.

    Quantiles invert the step CDF (``inf{x : F_n(x) >= u}``) unless
    ``interpolate`` is set, in which case the CDF is linearly interpolated
    between order statistics.
    """

    family = "empirical"
    kind = "discrete"

    def __init__(self, values, interpolate=False):
        values = np.asarray(values, dtype=np.float64).ravel()
        if values.size < 1:
            raise DomainError("empirical model needs at least one observation")
        if not np.all(np.isfinite(values)):
            raise DomainError("empirical model needs finite observations")
        self.values = np.sort(values)
        self.interpolate = bool(interpolate)

    @property
    def n(self):
        return self.values.size

    @property
    def params(self):
        return {"n": self.n, "interpolate": self.interpolate}

    @property
    def support(self):
        return (float(self.values[0]), float(self.values[-1]))

    def __eq__(self, other):
        return (type(self) is type(other) and self.interpolate == other.interpolate
                and np.array_equal(self.values, other.values))

    def __hash__(self):
        return hash((self.family, self.values.tobytes(), self.interpolate))

    def _count(self, x, side):
        x = np.asarray(x, dtype=np.float64)
        out = np.searchsorted(self.values, x, side=side) / self.n
        return float(out) if out.ndim == 0 else out

    def cdf(self, x):
        return self._count(x, "right")

    def cdf_left(self, x):
        return self._count(x, "left")

    def sf(self, x):
        out = 1.0 - np.asarray(self._count(x, "right"))
        return float(out) if out.ndim == 0 else out

    def density(self, x):
        x = np.asarray(x, dtype=np.float64)
        right = np.searchsorted(self.values, x, side="right")
        left = np.searchsorted(self.values, x, side="left")
        out = (right - left) / self.n
        return float(out) if out.ndim == 0 else out

    def quantile(self, u):
        u = _check_u(u)
        method = "interpolated_inverted_cdf" if self.interpolate else "inverted_cdf"
        out = np.quantile(self.values, u, method=method)
        return float(out) if np.ndim(out) == 0 else np.asarray(out)

    def mean(self):
        return float(self.values.mean())

    def sd(self):
        return float(self.values.std())

    def to_dict(self):
        return {"family": self.family, "params": {"n": self.n, "interpolate": self.interpolate}}

    def _draw(self, rng, n):
        return rng.choice(self.values, size=n, replace=True)


_CONSTRUCTORS = {
    "normal": NormalModel,
    "lognormal": LognormalModel,
    "weibull": WeibullModel,
    "gamma": GammaModel,
    "uniform": UniformModel,
    "exponential": ExponentialModel,
    "poisson": PoissonModel,
    "binomial": BinomialModel,
    "empirical": EmpiricalModel,
}


# ---------------------------------------------------------------------------
# Auxiliary distributions (chi-square, Fisher F, standard normal)

@dataclass(frozen=True)
class AuxDistribution:
    kind: str
    df1: float | None = None
    df2: float | None = None

    def __post_init__(self):
        if self.kind == "standard_normal":
            return
        if self.kind == "chi_square":
            _positive("df", self.df1)
        elif self.kind == "fisher_f":
            _positive("df1", self.df1)
            _positive("df2", self.df2)
        else:
            raise DomainError(f"unknown auxiliary distribution {self.kind!r}")

    @classmethod
    def chi_square(cls, df):
        return cls("chi_square", float(df))

    @classmethod
    def fisher_f(cls, df1, df2):
        return cls("fisher_f", float(df1), float(df2))

    @classmethod
    def standard_normal(cls):
        return cls("standard_normal")

    def cdf(self, x):
        x = float(x)
        if self.kind == "standard_normal":
            return kernels.norm_cdf(x)
        if x <= 0.0:
            return 0.0
        if self.kind == "chi_square":
            return kernels.gammainc(0.5 * self.df1, 0.5 * x)
        d1, d2 = self.df1, self.df2
        return kernels.betainc(0.5 * d1, 0.5 * d2, d1 * x / (d1 * x + d2))

    def sf(self, x):
        x = float(x)
        if self.kind == "standard_normal":
            return kernels.norm_sf(x)
        if x <= 0.0:
            return 1.0
        if self.kind == "chi_square":
            return kernels.gammaincc(0.5 * self.df1, 0.5 * x)
        d1, d2 = self.df1, self.df2
        return kernels.betainc(0.5 * d2, 0.5 * d1, d2 / (d2 + d1 * x))

    def quantile(self, u):
        u = float(_check_u(u))
        if self.kind == "standard_normal":
            return kernels.norm_ppf(u)
        return invert_tails(self.cdf, self.sf, u, 0.0, math.inf)


# ---------------------------------------------------------------------------
# Functional surface

def cdf(model, x):
    return model.cdf(x)


def quantile(model, u):
    return model.quantile(u)


def moments(model):
    return model.moments()


def draw_sample(model, n, seed):
    return model.sample(n, seed)


def aux_quantile(dist, u):
    return dist.quantile(u)
