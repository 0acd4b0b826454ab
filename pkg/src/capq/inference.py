"""Estimation from measured data.

Model fitting (maximum likelihood with a method-of-moments fallback), the
empirical model, a Monte Carlo yield oracle, plug-in index estimates and
percentile-bootstrap intervals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import optimize, special

from capq import _mc, kernels
from capq.classical import ProcessMoments, SpecLimits
from capq.dist_core import EmpiricalModel, ProcessModel
from capq.errors import CapqError, DomainError, NumericError
from capq.registry import INDEX_REGISTRY, IndexContext, as_request, evaluate

AUTO_FAMILIES = ("normal", "lognormal", "weibull", "gamma", "exponential", "uniform")


@dataclass(frozen=True)
class Sample:
    values: np.ndarray
    source: str = ""

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).ravel()
        if values.size < 2:
            raise DomainError(f"a sample needs at least 2 observations, got {values.size}")
        if not np.all(np.isfinite(values)):
            raise DomainError("sample contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n(self):
        return self.values.size

    def mean(self):
        return float(self.values.mean())

    def sd(self):
        """Sample standard deviation (n - 1 denominator)."""
        return float(self.values.std(ddof=1))

    def moments(self):
        return ProcessMoments(self.mean(), self.sd())


def _as_sample(sample):
    return sample if isinstance(sample, Sample) else Sample(sample)


class FitResult(NamedTuple):
    model: object
    ks: float
    method: str


def ks_statistic(values, model) -> float:
    """sup |F_n - F| over the sample, valid for continuous and discrete F."""
    x = np.sort(np.asarray(values, dtype=np.float64))
    n = x.size
    right = np.searchsorted(x, x, side="right") / n
    left = np.searchsorted(x, x, side="left") / n
    f_right = np.asarray(model.cdf(x), dtype=np.float64)
    f_left = np.asarray(model.cdf_left(x), dtype=np.float64)
    return float(max(np.max(np.abs(right - f_right)), np.max(np.abs(left - f_left))))


def _require(cond, msg):
    if not cond:
        raise DomainError(msg)


def _fit_weibull(x):
    x = x / x.max()
    logx = np.log(x)
    mean_log = logx.mean()

    def score(k):
        xk = x ** k
        return (xk * logx).sum() / xk.sum() - 1.0 / k - mean_log

    try:
        k = optimize.brentq(score, 1e-3, 1e3, xtol=1e-14, rtol=1e-14)
        method = "mle"
    except (ValueError, RuntimeError):
        # match the coefficient of variation instead
        cv = x.std() / x.mean()

        def cv_gap(k):
            g1, g2 = math.gamma(1 + 1 / k), math.gamma(1 + 2 / k)
            return math.sqrt(g2 - g1 * g1) / g1 - cv

        try:
            k = optimize.brentq(cv_gap, 0.05, 200.0)
        except ValueError:
            raise NumericError("weibull fit failed to converge") from None
        method = "moments"
    scale = float(np.mean(x ** k) ** (1.0 / k))
    return k, scale, method


def _fit_gamma(x):
    s = math.log(x.mean()) - np.log(x).mean()
    if not s > 0:
        raise DomainError("gamma fit needs non-constant data")
    k = (3.0 - s + math.sqrt((s - 3.0) ** 2 + 24.0 * s)) / (12.0 * s)
    method = "mle"
    for _ in range(100):
        step = (math.log(k) - special.digamma(k) - s) / (1.0 / k - special.polygamma(1, k))
        k_new = k - step
        if not (k_new > 0 and math.isfinite(k_new)):
            k, method = x.mean() ** 2 / x.var(), "moments"
            break
        if abs(k_new - k) <= 1e-14 * k:
            k = k_new
            break
        k = k_new
    return k, x.mean() / k, method


def fit_model(sample, family: str, trials: int | None = None) -> FitResult:
    """Fit ``family`` to the sample and score it with the KS statistic.

    The KS value is a ranking score only; with estimated parameters its usual
    critical values do not apply.
    """
    sample = _as_sample(sample)
    x = sample.values
    method = "mle"
    if family == "empirical":
        model = EmpiricalModel(x)
        return FitResult(model, ks_statistic(x, model), "empirical")
    if family == "normal":
        sd = x.std()
        _require(sd > 0, "normal fit needs non-constant data (sigma-hat = 0)")
        model = ProcessModel.normal(x.mean(), sd)
    elif family == "lognormal":
        _require(np.all(x > 0), "lognormal fit needs strictly positive data")
        logs = np.log(x)
        _require(logs.std() > 0, "lognormal fit needs non-constant data")
        model = ProcessModel.lognormal(logs.mean(), logs.std())
    elif family == "weibull":
        _require(np.all(x > 0), "weibull fit needs strictly positive data")
        _require(x.std() > 0, "weibull fit needs non-constant data")
        k, scale, method = _fit_weibull(x)
        model = ProcessModel.weibull(k, scale * x.max())
    elif family == "gamma":
        _require(np.all(x > 0), "gamma fit needs strictly positive data")
        k, scale, method = _fit_gamma(x)
        model = ProcessModel.gamma(k, scale)
    elif family == "exponential":
        _require(np.all(x >= 0), "exponential fit needs non-negative data")
        _require(x.mean() > 0, "exponential fit needs a positive mean")
        model = ProcessModel.exponential(1.0 / x.mean())
    elif family == "uniform":
        _require(x.max() > x.min(), "uniform fit needs non-constant data")
        model = ProcessModel.uniform(x.min(), x.max())
    elif family == "poisson":
        _require(np.all(x >= 0) and np.all(x == np.floor(x)), "poisson fit needs non-negative integers")
        _require(x.mean() > 0, "poisson fit needs a positive mean")
        model = ProcessModel.poisson(x.mean())
    elif family == "binomial":
        _require(np.all(x >= 0) and np.all(x == np.floor(x)), "binomial fit needs non-negative integers")
        n_trials = int(x.max()) if trials is None else int(trials)
        _require(n_trials >= max(1, x.max()), f"binomial trials={n_trials} below the largest count")
        model = ProcessModel.binomial(n_trials, x.mean() / n_trials)
    else:
        raise DomainError(f"cannot fit unknown family {family!r}")
    return FitResult(model, ks_statistic(x, model), method)


def fit_best(sample, families=AUTO_FAMILIES) -> FitResult:
    """Fit every applicable family and keep the smallest KS statistic."""
    best = None
    for family in families:
        try:
            fit = fit_model(sample, family)
        except CapqError:
            continue
        if best is None or fit.ks < best.ks:
            best = fit
    if best is None:
        raise DomainError(f"none of {list(families)} could be fitted")
    return best


def empirical_model(sample, interpolate=False) -> EmpiricalModel:
    return EmpiricalModel(_as_sample(sample).values, interpolate)


class YieldEstimate(NamedTuple):
    estimate: float
    standard_error: float
    n: int


def mc_yield(model, spec: SpecLimits, n: int = 1_000_000, seed=None, workers: int = 1) -> YieldEstimate:
    """Fraction of ``n`` seeded draws falling in [L, U], with its binomial s.e."""
    n = int(n)
    if n < 10_000:
        raise DomainError(f"Monte Carlo yield needs n >= 1e4, got {n}")
    draws = _mc.draw_chunked(lambda size, rng: model.sample(size, rng), n, seed, workers)
    inside = np.count_nonzero((draws >= spec.lower) & (draws <= spec.upper))
    p = inside / n
    return YieldEstimate(p, math.sqrt(p * (1.0 - p) / n), n)


# ---------------------------------------------------------------------------
# Plug-in estimation and bootstrap

def resolve_model(directive, sample=None, interpolate=False):
    """Turn a model directive into (model, fit record or None).

    ``directive`` is a ProcessModel, a ``{"family", "params"}`` mapping (fixed
    parameters), ``"empirical"``, ``"fit:auto"`` or a family name to fit.
    """
    if isinstance(directive, ProcessModel):
        return directive, None
    if isinstance(directive, dict):
        return ProcessModel.from_spec(directive["family"], directive.get("params", {})), None
    if sample is None:
        raise DomainError(f"model directive {directive!r} needs measured data")
    if directive == "empirical":
        return empirical_model(sample, interpolate), None
    fit = fit_best(sample) if directive == "fit:auto" else fit_model(sample, directive)
    return fit.model, fit


def _context(sample, config, model=None):
    if model is None:
        model, _ = resolve_model(config.model, sample, config.interpolate_quantiles)
    moments = sample.moments() if sample.sd() > 0 else None
    return IndexContext(spec=config.spec, desired=config.desired, model=model, moments=moments)


def estimate_index(sample, request, config):
    """Plug-in estimate of one index from data.

    Moment-based indices use the sample mean and n-1 standard deviation;
    yield and quantile indices use the model named by ``config.model``.
    """
    sample = _as_sample(sample)
    request = as_request(request)
    return evaluate(request, _context(sample, config), sample_size=sample.n)


class IntervalEstimate(NamedTuple):
    point: float
    lower: float
    upper: float
    level: float
    method: str
    replicates: int
    seed: int
    point_outside: bool


def bootstrap_ci(sample, request, B: int = 1000, level: float = 0.90, seed: int = 0,
                 config=None) -> IntervalEstimate:
    """Percentile bootstrap interval for an index estimate.

    Replicate ``b`` resamples with the generator of child seed ``(seed, b)``.
    When the model directive fits a family, the family chosen on the full
    sample is kept and only its parameters are re-estimated per replicate.
    """
    sample = _as_sample(sample)
    request = as_request(request)
    if B < 200:
        raise DomainError(f"bootstrap needs B >= 200, got {B}")
    if not 0 < level < 1:
        raise DomainError(f"confidence level must lie in (0, 1), got {level}")
    if seed is None:
        raise DomainError("bootstrap needs an explicit seed")
    if config is None:
        raise DomainError("bootstrap needs an analysis config (at least the specification limits)")

    n = sample.n
    idx = np.stack([_mc.child_rng(seed, b).integers(0, n, size=n) for b in range(B)])
    point = estimate_index(sample, request, config).value

    definition = INDEX_REGISTRY[request.name]
    estimates = np.full(B, np.nan)
    if definition.needs == "moments":
        means, sds = kernels.resample_mean_sd(sample.values, idx)
        for b in range(B):
            if sds[b] > 0:
                ctx_moments = ProcessMoments(float(means[b]), float(sds[b]))
                try:
                    estimates[b] = evaluate(request, _moment_context(config, ctx_moments)).value
                except CapqError:
                    pass
    else:
        directive = config.model
        if isinstance(directive, str) and directive not in ("empirical",):
            _, fit = resolve_model(directive, sample)
            directive = fit.model.family if fit is not None else directive
        for b in range(B):
            resample = sample.values[idx[b]]
            try:
                rs = Sample(resample)
                model, _ = resolve_model(directive, rs, config.interpolate_quantiles)
                estimates[b] = evaluate(request, _context(rs, config, model), sample_size=n).value
            except CapqError:
                pass

    defined = np.isfinite(estimates)
    if np.count_nonzero(~defined) > 0.1 * B:
        raise NumericError(f"{request.name} undefined on {np.count_nonzero(~defined)} of {B} "
                           f"bootstrap resamples (limit 10%)")
    tail = 0.5 * (1.0 - level)
    lower, upper = np.quantile(estimates[defined], [tail, 1.0 - tail])
    lower, upper = float(lower), float(upper)
    outside = not (point is not None and lower <= point <= upper)
    return IntervalEstimate(point, lower, upper, level, "percentile_bootstrap", B, int(seed), outside)


def _moment_context(config, moments):
    return IndexContext(spec=config.spec, desired=config.desired, model=None, moments=moments)
