"""Registry of univariate indices addressable by name.

Each entry knows whether it needs process moments or a process model, its
literature citation, its parameter defaults and how to compute itself from an
:class:`IndexContext`.  The CLI and :func:`capq.inference.estimate_index`
dispatch through here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

from capq import classical, generalized, yield_based
from capq.classical import ProcessMoments, SpecLimits
from capq.dist_core import EmpiricalModel
from capq.errors import ConfigError, DomainError
from capq.yield_based import DesiredRegion

NOTE_DEFAULT_T = "target T not given; the specification midpoint M was used"
NOTE_VANNMAN = ("computed as (d - u|mu - M|) / (3 sqrt(sigma^2 + v (mu - T)^2)), the form under which "
                "(u, v) = (0,0), (1,0), (0,1), (1,1) give C_p, C_pk, C_pm, C_pmk; the often-quoted "
                "(d - u) / (6 sqrt(...)) printing does not have these specializations")
NOTE_SPIRING = ("computed as C_p / sqrt(1 + g(delta)) with delta = (mu - T)/sigma and g(delta) = w delta^2, "
                "so that it coincides with the Vannman index at (0, w)")
NOTE_CPK_MIN = "C_pk and C_pmk use min(U - mu, mu - L) in the numerator"


@dataclass(frozen=True)
class IndexRequest:
    name: str
    params: dict = field(default_factory=dict)

    def to_dict(self):
        return {"name": self.name, "params": dict(self.params)}


def as_request(request) -> IndexRequest:
    if isinstance(request, IndexRequest):
        return request
    if isinstance(request, str):
        return IndexRequest(request)
    if isinstance(request, dict):
        params = {k: v for k, v in request.items() if k != "name"}
        if "name" not in request:
            raise ConfigError(f"index request {request!r} has no 'name'")
        return IndexRequest(request["name"], params)
    raise ConfigError(f"cannot interpret index request {request!r}")


@dataclass
class IndexContext:
    spec: SpecLimits
    desired: DesiredRegion = DesiredRegion()
    model: object | None = None
    moments: ProcessMoments | None = None


@dataclass
class IndexResult:
    name: str
    value: float | None
    components: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    params: dict = field(default_factory=dict)

    @property
    def infinite(self) -> bool:
        return self.value is not None and math.isinf(self.value)


@dataclass(frozen=True)
class IndexDef:
    name: str
    needs: str  # "moments" or "model"
    citation: str
    summary: str
    compute: Callable
    defaults: dict = field(default_factory=dict)
    quantile_levels: Callable | None = None  # params, ctx -> tail levels used


def _target_notes(ctx, uses_target=True):
    return [NOTE_DEFAULT_T] if uses_target and ctx.spec.target is None else []


def _basic(attr, uses_target):
    def compute(ctx, params):
        values = classical.basic_indices(ctx.spec, ctx.moments)
        notes = _target_notes(ctx, uses_target)
        if attr in ("c_pk", "c_pmk"):
            notes.append(NOTE_CPK_MIN)
        return getattr(values, attr), {}, notes
    return compute


def _s_pk(ctx, params):
    return classical.s_pk(ctx.spec, ctx.moments), {}, []


def _vannman(ctx, params):
    u, v = float(params["u"]), float(params["v"])
    value = classical.vannman(ctx.spec, ctx.moments, u, v)
    return value, {}, _target_notes(ctx, v > 0) + [NOTE_VANNMAN]


def _spiring(ctx, params):
    g = classical.quadratic_loss(float(params["w"]))
    value = classical.spiring_cpw(ctx.spec, ctx.moments, g)
    return value, {}, _target_notes(ctx) + [NOTE_SPIRING]


def _yield(ctx, params):
    ys = yield_based.yield_summary(ctx.model, ctx.spec)
    return ys.p, {"p_nc": ys.p_nc, "lower_nc": ys.lower_nc, "upper_nc": ys.upper_nc}, []


def _clements(ctx, params):
    return yield_based.clements_cp(ctx.spec, ctx.model, float(params["a"])), {}, []


def _mukherjee_levels(params, ctx):
    if "alpha1" in params and "alpha2" in params:
        return params["alpha1"], params["alpha2"]
    a1, a2 = ctx.desired.tails(ctx.model)
    return params.get("alpha1", a1), params.get("alpha2", a2)


def _mukherjee(ctx, params):
    a1, a2 = _mukherjee_levels(params, ctx)
    value = yield_based.mukherjee_i(ctx.spec, ctx.model, float(a1), float(a2))
    return value, {"alpha1": float(a1), "alpha2": float(a2)}, []


def _yb_ratio(ctx, params):
    return yield_based.yb_ratio(float(params["p0_nc"]), ctx.model, ctx.spec), {}, []


def _yb_cf(ctx, params):
    ys = yield_based.yield_summary(ctx.model, ctx.spec)
    value = yield_based.yb_cf(float(params["alpha0_L"]), float(params["alpha0_U"]), ctx.model, ctx.spec)
    return value, {"lower_nc": ys.lower_nc, "upper_nc": ys.upper_nc}, []


def _borges_ho(ctx, params):
    return yield_based.borges_ho_c(ctx.model, ctx.spec), {}, []


def _perakis(ctx, params):
    return yield_based.perakis_cpc(float(params["p0"]), ctx.model, ctx.spec), {}, []


def _inputs(ctx, target=None):
    return generalized.GeneralizedInputs(spec=ctx.spec, model=ctx.model, desired=ctx.desired, target=target)


def _c_py(ctx, params):
    inputs = _inputs(ctx)
    p = yield_based.yield_summary(ctx.model, ctx.spec).p
    return generalized.c_py(inputs), {"p": p, "p0": ctx.desired.p0(ctx.model)}, []


def _c_pyk(ctx, params):
    res = generalized.c_pyk(_inputs(ctx))
    return res.value, {"c_pyu": res.upper, "c_pyl": res.lower, "median": float(ctx.model.median())}, []


def _c_ptk(ctx, params):
    res = generalized.c_ptk(_inputs(ctx, ctx.spec.target_or_mid()))
    return res.value, {"upper": res.upper, "lower": res.lower}, _target_notes(ctx)


def _a_levels(params, ctx):
    return (float(params["a"]), float(params["a"]))


INDEX_REGISTRY: dict[str, IndexDef] = {d.name: d for d in [
    IndexDef("c_p", "moments", "Juran (1974)", "(U - L) / (6 sigma)", _basic("c_p", False)),
    IndexDef("c_pk", "moments", "Kane (1986)", "min(U - mu, mu - L) / (3 sigma)", _basic("c_pk", False)),
    IndexDef("c_pm", "moments", "Hsiang and Taguchi (1985)", "(U - L) / (6 sqrt(sigma^2 + (mu - T)^2))",
             _basic("c_pm", True)),
    IndexDef("c_pmk", "moments", "Pearn, Kotz and Johnson (1992)",
             "min(U - mu, mu - L) / (3 sqrt(sigma^2 + (mu - T)^2))", _basic("c_pmk", True)),
    IndexDef("s_pk", "moments", "Boyles (1994)", "Phi^-1((Phi((U - mu)/sigma) + Phi((mu - L)/sigma))/2) / 3",
             _s_pk),
    IndexDef("vannman", "moments", "Vannman (1995)", "(d - u|mu - M|) / (3 sqrt(sigma^2 + v (mu - T)^2))",
             _vannman, {"u": 1.0, "v": 1.0}),
    IndexDef("spiring_cpw", "moments", "Spiring (1997)", "C_p / sqrt(1 + w delta^2)", _spiring, {"w": 1.0}),
    IndexDef("yield", "model", "process yield", "P(L <= X <= U)", _yield),
    IndexDef("clements_cp", "model", "Clements (1989)", "(U - L) / (xi_{1-a} - xi_a)", _clements,
             {"a": yield_based.CLEMENTS_A}, _a_levels),
    IndexDef("mukherjee_i", "model", "Mukherjee (1995)", "(U - L) / (F^-1(1 - alpha2) - F^-1(alpha1))",
             _mukherjee, {}, _mukherjee_levels),
    IndexDef("yb_ratio", "model", "Yeh and Bhattacharya (1998)", "tolerated / actual nonconforming fraction",
             _yb_ratio, {"p0_nc": 0.0027}),
    IndexDef("yb_cf", "model", "Yeh and Bhattacharya (1998)", "min(alpha0_L / alpha_L, alpha0_U / alpha_U)",
             _yb_cf, {"alpha0_L": 0.00135, "alpha0_U": 0.00135}),
    IndexDef("borges_ho_c", "model", "Borges and Ho (2001)", "Phi^-1(1 - pi/2) / 3", _borges_ho),
    IndexDef("perakis_cpc", "model", "Perakis and Xekalaki (2002)", "(1 - p0) / (1 - p)", _perakis,
             {"p0": yield_based.DEFAULT_P0}),
    IndexDef("c_py", "model", "generalized yield family (2010)", "p / p0", _c_py),
    IndexDef("c_pyk", "model", "generalized yield family (2010)", "min(C_pyu, C_pyl), split at the median",
             _c_pyk),
    IndexDef("c_pTk", "model", "generalized yield family (2010)", "min of the two halves split at the target",
             _c_ptk),
]}


def resolve_params(request: IndexRequest) -> tuple[dict, list[str]]:
    """Merge request params over the defaults; report which defaults were applied."""
    if request.name not in INDEX_REGISTRY:
        raise ConfigError(f"unknown index {request.name!r}; valid indices: {', '.join(INDEX_REGISTRY)}")
    definition = INDEX_REGISTRY[request.name]
    allowed = set(definition.defaults) | ({"alpha1", "alpha2"} if request.name == "mukherjee_i" else set())
    unknown = set(request.params) - allowed
    if unknown:
        raise ConfigError(f"index {request.name!r} does not take parameters {sorted(unknown)}")
    params = dict(definition.defaults)
    params.update(request.params)
    applied = [f"{request.name}.{k} = {v!r}" for k, v in definition.defaults.items() if k not in request.params]
    return params, applied


def evaluate(request, ctx: IndexContext, sample_size: int | None = None) -> IndexResult:
    """Compute one registered index.

    ``sample_size`` switches on the interior-quantile rule for empirical
    models: a tail level alpha needs at least ceil(1/alpha) observations.
    """
    request = as_request(request)
    params, _ = resolve_params(request)
    definition = INDEX_REGISTRY[request.name]
    if definition.needs == "moments" and ctx.moments is None:
        raise DomainError(f"{request.name} needs a positive process standard deviation")
    if definition.needs == "model" and ctx.model is None:
        raise DomainError(f"{request.name} needs a process model")
    if (sample_size is not None and definition.quantile_levels is not None
            and isinstance(ctx.model, EmpiricalModel)):
        levels = [a for a in definition.quantile_levels(params, ctx) if a]
        if levels:
            n_min = math.ceil(1.0 / min(levels) - 1e-9)
            if sample_size < n_min:
                raise DomainError(f"{request.name}: tail level {min(levels):g} needs at least n = {n_min} "
                                  f"observations for an interior empirical quantile, got n = {sample_size}")
    value, components, notes = definition.compute(ctx, params)
    return IndexResult(request.name, float(value), components, notes, params)
