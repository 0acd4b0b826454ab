"""Multivariate capability.

Two routes are offered.  The geometric one works with a multivariate normal
model directly: the ellipsoid volume ratio, Chen's MC_p and the Shahriari
three-component vector.  The ordering route maps each observation through a
structural function ``N`` (weighted sum, min or max), which orders vectors
by ``N(x1) <= N(x2)``, and then reuses the univariate yield-ratio indices on
the transformed scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import integrate

from capq import _mc, kernels
from capq.classical import SpecLimits
from capq.dist_core import AuxDistribution, EmpiricalModel, ProcessModel, _ClosedForm, invert_tails
from capq.errors import CapqError, DomainError, NumericError
from capq.generalized import split_at_level
from capq.inference import fit_model, ks_statistic
from capq.yield_based import DesiredRegion, yield_summary

STRUCTURAL_KINDS = ("weighted_sum", "min", "max")
BISECTION_STEPS = 200
PIPELINE_MIN_N = 30

NOTE_SHAHRIARI_BOX = ("c3 uses the spec-shaped box centred at the sample mean, scaled to circumscribe "
                      "the fitted 1 - p_nc ellipsoid")
NOTE_VOLUME_EXPONENT = "volume ratio uses the exponent v/2 implied by ellipsoid geometry"


def _vector(name, values):
    arr = np.atleast_1d(np.asarray(values, dtype=np.float64))
    if arr.ndim != 1:
        raise DomainError(f"{name} must be a vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    return arr


@dataclass(frozen=True, eq=False)
class MvSpec:
    """Hyperrectangular specification region with per-axis limits."""

    lower: np.ndarray
    upper: np.ndarray
    target: np.ndarray | None = None

    def __post_init__(self):
        lower, upper = _vector("L", self.lower), _vector("U", self.upper)
        if lower.shape != upper.shape:
            raise DomainError(f"L and U differ in length: {lower.size} vs {upper.size}")
        if not np.all(lower < upper):
            bad = np.flatnonzero(~(lower < upper)).tolist()
            raise DomainError(f"need L_i < U_i on every axis; violated on axes {bad}")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if self.target is not None:
            target = _vector("T", self.target)
            if target.shape != lower.shape:
                raise DomainError(f"T has length {target.size}, expected {lower.size}")
            if np.any(target < lower) or np.any(target > upper):
                raise DomainError("T must lie inside the specification box")
            object.__setattr__(self, "target", target)

    @property
    def dim(self):
        return self.lower.size

    @property
    def midpoint(self):
        return 0.5 * (self.lower + self.upper)

    @property
    def half_width(self):
        return 0.5 * (self.upper - self.lower)

    def scaled(self, factor):
        """Same centre, half-widths multiplied by ``factor``."""
        m, d = self.midpoint, self.half_width * factor
        target = None if self.target is None else self.target
        return MvSpec(m - d, m + d, target)

    def to_dict(self):
        out = {"L": self.lower.tolist(), "U": self.upper.tolist()}
        if self.target is not None:
            out["T"] = self.target.tolist()
        return out

    def __eq__(self, other):
        if not isinstance(other, MvSpec):
            return NotImplemented
        same_t = (self.target is None and other.target is None) or (
            self.target is not None and other.target is not None and np.array_equal(self.target, other.target))
        return np.array_equal(self.lower, other.lower) and np.array_equal(self.upper, other.upper) and same_t

    __hash__ = None


@dataclass(frozen=True, eq=False)
class StructuralFunction:
    """Scalarizing map N(x) applied row by row."""

    kind: str
    weights: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in STRUCTURAL_KINDS:
            raise DomainError(f"unknown structural function {self.kind!r}; expected one of {STRUCTURAL_KINDS}")
        if self.kind == "weighted_sum":
            if self.weights is None:
                raise DomainError("weighted_sum needs weights")
            object.__setattr__(self, "weights", _vector("weights", self.weights))
        elif self.weights is not None:
            raise DomainError(f"{self.kind} takes no weights")

    @classmethod
    def weighted_sum(cls, weights):
        return cls("weighted_sum", weights)

    @classmethod
    def minimum(cls):
        return cls("min")

    @classmethod
    def maximum(cls):
        return cls("max")

    @property
    def label(self):
        if self.kind == "weighted_sum":
            return "weighted_sum(" + ", ".join(f"{w:g}" for w in self.weights) + ")"
        return self.kind

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 0:
            raise DomainError("structural functions act on vectors")
        if self.kind == "weighted_sum":
            if x.shape[-1] != self.weights.size:
                raise DomainError(f"dimension mismatch: {x.shape[-1]} columns, {self.weights.size} weights")
            out = x @ self.weights
        elif self.kind == "min":
            out = x.min(axis=-1)
        else:
            out = x.max(axis=-1)
        return float(out) if np.ndim(out) == 0 else out

    def to_dict(self):
        out = {"kind": self.kind}
        if self.weights is not None:
            out["weights"] = self.weights.tolist()
        return out

    def __eq__(self, other):
        if not isinstance(other, StructuralFunction):
            return NotImplemented
        if self.kind != other.kind:
            return False
        return self.weights is None or np.array_equal(self.weights, other.weights)

    __hash__ = None


def _matrix(data, dim=None):
    x = np.asarray(data, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise DomainError(f"data must be an n x v matrix, got shape {x.shape}")
    if dim is not None and x.shape[1] != dim:
        raise DomainError(f"data has {x.shape[1]} columns, the specification has {dim} axes")
    if not np.all(np.isfinite(x)):
        raise DomainError("data contain non-finite values")
    return x


def structural_transform(data, N: StructuralFunction) -> np.ndarray:
    """``Y_j = N(row_j)``."""
    x = _matrix(data)
    return np.asarray(N(x), dtype=np.float64)


class MvNormal:
    """Multivariate normal process model."""

    def __init__(self, mean, cov):
        mean = _vector("mean", mean)
        cov = np.atleast_2d(np.asarray(cov, dtype=np.float64))
        if cov.shape != (mean.size, mean.size):
            raise DomainError(f"covariance shape {cov.shape} does not match mean length {mean.size}")
        if not np.all(np.isfinite(cov)):
            raise DomainError("covariance must be finite")
        scale = max(1.0, float(np.max(np.abs(cov))))
        if np.max(np.abs(cov - cov.T)) > 1e-12 * scale:
            raise DomainError("covariance matrix is not symmetric")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise DomainError("covariance matrix is not positive definite") from None
        self.mean, self.cov, self.chol = mean, cov, chol

    @classmethod
    def from_data(cls, data):
        """Sample mean and (n - 1) covariance; a singular S is a numeric error."""
        x = _matrix(data)
        n, v = x.shape
        if n <= v:
            raise DomainError(f"need more observations than variables, got n={n}, v={v}")
        cov = np.atleast_2d(np.cov(x, rowvar=False, ddof=1))
        try:
            return cls(x.mean(axis=0), cov)
        except DomainError as exc:
            raise NumericError(f"sample covariance is singular: {exc}") from None

    @property
    def dim(self):
        return self.mean.size

    @property
    def independent(self):
        return bool(np.all(self.cov[~np.eye(self.dim, dtype=bool)] == 0.0))

    def sample(self, n, seed=None, workers=1):
        """``n`` draws, generated in seeded chunks (independent of ``workers``)."""
        n = int(n)
        if n < 1:
            raise DomainError(f"sample size must be >= 1, got {n}")

        def draw(size, rng):
            return rng.standard_normal((size, self.dim)) @ self.chol.T + self.mean

        return _mc.draw_chunked(draw, n, seed, workers)

    def mahalanobis2(self, x):
        """``(x - mu)' Sigma^-1 (x - mu)`` row by row."""
        z = np.linalg.solve(self.chol, (np.atleast_2d(x) - self.mean).T)
        return np.sum(z * z, axis=0)

    def to_dict(self):
        return {"family": "mv_normal", "mean": self.mean.tolist(), "cov": self.cov.tolist()}

    def __repr__(self):
        return f"MvNormal(mean={self.mean.tolist()}, cov={self.cov.tolist()})"


class IndependentExtremeModel(_ClosedForm):
    """Max or min of independent normals.

    ``F_max(y) = prod Phi((y - mu_i)/sigma_i)``; the min follows by symmetry.
    Both tails are evaluated in log space so that the far tails keep their
    relative precision.
    """

    def __init__(self, kind, mus, sigmas):
        if kind not in ("max", "min"):
            raise DomainError(f"kind must be 'max' or 'min', got {kind!r}")
        self.kind_extreme = kind
        self.mus = _vector("mu", mus)
        self.sigmas = _vector("sigma", sigmas)
        if self.mus.shape != self.sigmas.shape or not np.all(self.sigmas > 0):
            raise DomainError("need matching mean and positive sd vectors")
        self.family = f"{kind}_of_independent_normals"

    @property
    def params(self):
        return {"kind": self.kind_extreme, "mu": self.mus.tolist(), "sigma": self.sigmas.tolist()}

    def __hash__(self):
        return hash((self.family, self.mus.tobytes(), self.sigmas.tobytes()))

    def _z(self, x):
        return (np.asarray(x, dtype=np.float64)[..., None] - self.mus) / self.sigmas

    def _max_tails(self, z):
        lo = kernels.norm_cdf(z)
        hi = kernels.norm_sf(z)
        with np.errstate(divide="ignore"):
            cdf = np.exp(np.sum(np.log(lo), axis=-1))
        sf = -np.expm1(np.sum(np.log1p(-hi), axis=-1))
        return cdf, sf

    def _cdf(self, x):
        z = self._z(x)
        if self.kind_extreme == "max":
            return self._max_tails(z)[0]
        # min(X) = -max(-X)
        return self._max_tails(-z)[1]

    def _sf(self, x):
        z = self._z(x)
        if self.kind_extreme == "max":
            return self._max_tails(z)[1]
        return self._max_tails(-z)[0]

    def _pdf(self, x):
        z = self._z(x)
        sign = 1.0 if self.kind_extreme == "max" else -1.0
        tail = kernels.norm_cdf(sign * z)
        dens = np.exp(-0.5 * z * z) / (math.sqrt(2.0 * math.pi) * self.sigmas)
        total = np.zeros(np.shape(x))
        for i in range(self.mus.size):
            others = np.prod(np.delete(tail, i, axis=-1), axis=-1)
            total = total + dens[..., i] * others
        return total

    def _ppf(self, u):
        u = np.asarray(u, dtype=np.float64)
        flat = [invert_tails(self.cdf, self.sf, float(ui), -math.inf, math.inf) for ui in u.ravel()]
        return np.asarray(flat).reshape(u.shape)

    def _moment(self, k):
        lo = float(np.min(self.mus - 12 * self.sigmas))
        hi = float(np.max(self.mus + 12 * self.sigmas))
        val, _ = integrate.quad(lambda y: y ** k * float(self._pdf(y)), lo, hi, limit=200,
                                points=sorted(self.mus.tolist()))
        return val

    def mean(self):
        return self._moment(1)

    def sd(self):
        m = self.mean()
        return math.sqrt(max(self._moment(2) - m * m, 0.0))

    def _draw(self, rng, n):
        x = rng.standard_normal((n, self.mus.size)) * self.sigmas + self.mus
        return x.max(axis=1) if self.kind_extreme == "max" else x.min(axis=1)


class TransformedModel(NamedTuple):
    model: object
    method: str
    n: int | None  # sample size behind the model, None when exact


def transformed_model(source, N: StructuralFunction, family=None, mc_n=1_000_000, seed=None,
                      workers=1) -> TransformedModel:
    """Distribution of ``N(X)``.

    An ``MvNormal`` source gives an exact normal for weighted sums, the closed
    form for max/min with diagonal covariance and a seeded Monte Carlo
    empirical model otherwise.  A data matrix gives either the empirical model
    of ``N(data)`` or, when ``family`` is named, the fitted family.
    """
    if isinstance(source, MvNormal):
        if N.kind == "weighted_sum":
            if N.weights.size != source.dim:
                raise DomainError(f"dimension mismatch: model has {source.dim} axes, N has {N.weights.size}")
            w = N.weights
            sd = math.sqrt(float(w @ source.cov @ w))
            if not sd > 0:
                raise DomainError("weighted sum has zero variance")
            return TransformedModel(ProcessModel.normal(float(w @ source.mean), sd), "exact_normal", None)
        if source.independent:
            sds = np.sqrt(np.diag(source.cov))
            return TransformedModel(IndependentExtremeModel(N.kind, source.mean, sds), "closed_form", None)
        if seed is None:
            raise DomainError("Monte Carlo transform needs a seed")
        draws = N(source.sample(mc_n, seed, workers))
        return TransformedModel(EmpiricalModel(draws), "monte_carlo", int(mc_n))
    y = structural_transform(source, N)
    if family is None or family == "empirical":
        return TransformedModel(EmpiricalModel(y), "empirical", y.size)
    return TransformedModel(fit_model(y, family).model, f"fitted:{family}", y.size)


def transformed_spec(mv: MvSpec, N: StructuralFunction) -> SpecLimits:
    lo, hi = float(N(mv.lower)), float(N(mv.upper))
    if not lo < hi:
        raise DomainError(f"N maps the limits to N(L)={lo}, N(U)={hi}; need N(L) < N(U)")
    target = None if mv.target is None else float(N(mv.target))
    return SpecLimits(lo, hi, target)


@dataclass
class MvGeneralized:
    c_py_M: float
    c_pyk_M: float
    c_pTk_M: float
    p: float
    p0: float
    standard_error: float
    spec: SpecLimits
    model: object
    method: str
    structural: StructuralFunction
    notes: list = field(default_factory=list)


def mv_generalized(mv: MvSpec, N: StructuralFunction, source, desired: DesiredRegion | None = None,
                   family=None, mc_n=1_000_000, seed=None, workers=1) -> MvGeneralized:
    """Yield-ratio indices on the scale of ``N(X)``.

    The desired region is given on the transformed scale (tail proportions by
    default).  ``c_pyk_M`` splits at F = 1/2; ``c_pTk_M`` splits at ``N(T)``,
    or at ``N(M)`` when no target vector is given.  The standard error is the
    binomial one of the estimated yield divided by p0, and zero for exact
    models.
    """
    desired = DesiredRegion() if desired is None else desired
    if isinstance(source, MvNormal) and source.dim != mv.dim:
        raise DomainError(f"model has {source.dim} axes, the specification has {mv.dim}")
    if not isinstance(source, MvNormal):
        source = _matrix(source, mv.dim)
    spec = transformed_spec(mv, N)
    tm = transformed_model(source, N, family, mc_n, seed, workers)
    model = tm.model
    p = yield_summary(model, spec).p
    p0 = desired.p0(model)
    if not p0 > 0:
        raise DomainError(f"desired yield p0 must be > 0, got {p0}")
    notes = []
    pivot = spec.target
    if pivot is None:
        pivot = float(N(mv.midpoint))
        notes.append("target vector not given; the split for c_pTk_M uses N(M)")
    pyk = split_at_level(model, spec, desired, 0.5)
    ptk = split_at_level(model, spec, desired, float(model.cdf(pivot)))
    se = 0.0 if tm.n is None else math.sqrt(p * (1.0 - p) / tm.n) / p0
    return MvGeneralized(p / p0, pyk.value, ptk.value, p, p0, se, spec, model, tm.method, N, notes)


# ---------------------------------------------------------------------------
# Geometric indices

def ellipsoid_volume(cov, level) -> float:
    """Volume of ``{x : x' Sigma^-1 x <= level}``."""
    cov = np.atleast_2d(np.asarray(cov, dtype=np.float64))
    v = cov.shape[0]
    sign, logdet = np.linalg.slogdet(cov)
    if sign <= 0:
        raise DomainError("covariance must be positive definite")
    log_unit_ball = 0.5 * v * math.log(math.pi) - math.lgamma(0.5 * v + 1.0)
    return math.exp(log_unit_ball + 0.5 * logdet + 0.5 * v * math.log(level))


def chi_square_level(dim, p_nc=0.0027) -> float:
    if not 0 < p_nc < 1:
        raise DomainError(f"p_nc must lie in (0, 1), got {p_nc}")
    return AuxDistribution.chi_square(dim).quantile(1.0 - p_nc)


def ellipsoid_volume_ratio(model, level, p_nc=0.0027) -> float:
    """Volume of the ``level`` ellipsoid over that of the 1 - p_nc ellipsoid.

    Both regions share the same shape matrix, so the ratio is
    ``(level / R) ** (v / 2)`` with ``R`` the chi-square(v) quantile.
    ``model`` is an :class:`MvNormal` or just the dimension v.
    """
    if not level > 0 or not math.isfinite(level):
        raise DomainError(f"level must be a positive finite number, got {level}")
    dim = model.dim if isinstance(model, MvNormal) else int(model)
    if dim < 1:
        raise DomainError(f"dimension must be >= 1, got {dim}")
    r = chi_square_level(dim, p_nc)
    if level == r:
        return 1.0
    return (level / r) ** (0.5 * dim)


class ChenResult(NamedTuple):
    value: float
    radius: float
    iterations: int
    n: int


def _chen_radius(stat, coverage):
    """Smallest R with P[stat <= R] >= coverage, by bisection on fixed draws."""
    lo, hi = 0.0, float(np.max(stat))
    if kernels.fraction_le(stat, lo) >= coverage:
        return 0.0, 0
    hi = hi * (1.0 + 1e-12) + 1e-300
    for step in range(1, BISECTION_STEPS + 1):
        mid = 0.5 * (lo + hi)
        if kernels.fraction_le(stat, mid) >= coverage:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-13 * hi:
            return hi, step
    raise NumericError(f"Chen bisection did not converge in {BISECTION_STEPS} steps")


def chen_mcp(source, mv: MvSpec, p_nc=0.0027, mc_n=1_000_000, seed=None, workers=1,
             details=False):
    """``1 / R`` where ``P[max_i |X_i - M_i| / d_i <= R] = 1 - p_nc``.

    For a model the probability is estimated from ``mc_n`` seeded draws,
    shared by every bisection step so the search is monotone.  A data matrix
    is used as is.
    """
    if not 0 < p_nc < 1:
        raise DomainError(f"p_nc must lie in (0, 1), got {p_nc}")
    if isinstance(source, MvNormal):
        if source.dim != mv.dim:
            raise DomainError(f"model has {source.dim} axes, the specification has {mv.dim}")
        if mc_n < 100_000:
            raise DomainError(f"chen_mcp needs mc_n >= 1e5, got {mc_n}")
        if seed is None:
            raise DomainError("chen_mcp needs a seed for its Monte Carlo draws")
        x = source.sample(mc_n, seed, workers)
    else:
        x = _matrix(source, mv.dim)
    stat = kernels.scaled_max_abs(x, mv.midpoint, mv.half_width)
    radius, steps = _chen_radius(stat, 1.0 - p_nc)
    value = math.inf if radius == 0.0 else 1.0 / radius
    result = ChenResult(value, radius, steps, x.shape[0])
    return result if details else value


class ShahriariVector(NamedTuple):
    c1: float
    c2: float
    c3: int
    t2: float
    f_statistic: float
    box_scale: float
    notes: tuple


def shahriari_vector(data, mv: MvSpec, p_nc=0.0027, mc_n=1_000_000, seed=None, workers=1) -> ShahriariVector:
    """Three-component capability vector from an n x v data matrix.

    c1 is Chen's index for the fitted normal, c2 the p-value of Hotelling's
    T-squared test of mean = M and c3 the box-containment indicator.
    """
    x = _matrix(data, mv.dim)
    n, v = x.shape
    fitted = MvNormal.from_data(x)
    c1 = chen_mcp(fitted, mv, p_nc, mc_n, seed, workers)

    diff = fitted.mean - mv.midpoint
    t2 = float(n * fitted.mahalanobis2(mv.midpoint)[0])
    f_stat = (n - v) / (v * (n - 1)) * t2
    c2 = 1.0 if not np.any(diff) else float(AuxDistribution.fisher_f(v, n - v).sf(f_stat))

    r = chi_square_level(v, p_nc)
    reach = np.sqrt(r * np.diag(fitted.cov))
    scale = float(np.max(reach / mv.half_width))
    half = scale * mv.half_width
    inside = np.all(fitted.mean - half >= mv.lower) and np.all(fitted.mean + half <= mv.upper)
    return ShahriariVector(c1, min(1.0, max(0.0, c2)), int(inside), t2, f_stat, scale, (NOTE_SHAHRIARI_BOX,))


# ---------------------------------------------------------------------------
# Five-step pipeline

def ks_critical(n, significance):
    """Asymptotic one-sample KS critical value ``sqrt(-ln(a/2)/2) / sqrt(n)``."""
    if not 0 < significance < 1:
        raise DomainError(f"significance must lie in (0, 1), got {significance}")
    return math.sqrt(-0.5 * math.log(0.5 * significance)) / math.sqrt(n)


@dataclass
class FitRecord:
    structural: str
    family: str
    ks: float | None
    critical: float
    adequate: bool
    params: dict | None = None
    error: str | None = None

    def to_dict(self):
        return {"structural": self.structural, "family": self.family, "ks": self.ks,
                "critical": self.critical, "adequate": self.adequate, "params": self.params,
                "error": self.error}


@dataclass
class PipelineReport:
    fits: list
    winner: FitRecord | None
    adequate: bool
    indices: MvGeneralized
    warnings: list = field(default_factory=list)


def five_step_pipeline(data, families, Ns, mv: MvSpec, desired: DesiredRegion | None = None,
                       significance=0.05) -> PipelineReport:
    """Transform, fit, screen, select and evaluate.

    Every structural function in ``Ns`` is applied to the data and every
    family in ``families`` is fitted to the result.  Fits whose KS statistic
    is below the asymptotic critical value count as adequate (a screening
    rule, since parameters are estimated); the adequate pair with the
    smallest statistic wins.  Without any adequate fit the indices fall back
    to the empirical model of the best-scoring transform.
    """
    x = _matrix(data, mv.dim)
    n = x.shape[0]
    if n < PIPELINE_MIN_N:
        raise DomainError(f"the pipeline needs at least {PIPELINE_MIN_N} observations, got {n}")
    if not Ns:
        raise DomainError("no structural functions given")
    if not families:
        raise DomainError("no candidate families given")
    crit = ks_critical(n, significance)
    fits, scored = [], []
    for N in Ns:
        y = structural_transform(x, N)
        for fam in families:
            try:
                model = fit_model(y, fam).model
            except CapqError as exc:
                fits.append(FitRecord(N.label, fam, None, crit, False, None, str(exc)))
                continue
            ks = ks_statistic(y, model)
            rec = FitRecord(N.label, fam, ks, crit, ks <= crit, dict(model.params))
            fits.append(rec)
            scored.append((ks, len(scored), N, rec))

    warnings = []
    adequate = [s for s in scored if s[3].adequate]
    if adequate:
        _, _, best_n, winner = min(adequate, key=lambda s: (s[0], s[1]))
        indices = mv_generalized(mv, best_n, x, desired, family=winner.family)
    else:
        warnings.append("no adequate model: every candidate fit was rejected; "
                        "indices use the empirical distribution")
        winner = None
        best_n = min(scored, key=lambda s: (s[0], s[1]))[2] if scored else Ns[0]
        indices = mv_generalized(mv, best_n, x, desired, family=None)
    return PipelineReport(fits, winner, winner is not None, indices, warnings)
