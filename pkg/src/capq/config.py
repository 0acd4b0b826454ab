"""Analysis configuration: parsing, validation and default tracking.

A configuration is a JSON object.  Limits are given either at the top level
(``L``, ``U``, ``T``) or inside a ``spec`` block.  Every default that gets
filled in is recorded in ``defaults_applied`` so reports can echo it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from capq.classical import SpecLimits
from capq.dist_core import FAMILIES, ProcessModel
from capq.errors import CapqError, ConfigError
from capq.inference import AUTO_FAMILIES
from capq.multivariate import MvNormal, MvSpec, StructuralFunction
from capq.registry import IndexRequest, as_request, resolve_params
from capq.yield_based import DEFAULT_TAIL, DesiredRegion

SCHEMA_VERSION = 1
DEFAULT_INDICES = ("c_p", "c_pk", "c_pm", "c_pmk", "c_py", "c_pyk")
MV_INDICES = ("c_py_M", "c_pyk_M", "c_pTk_M", "chen_mcp", "shahriari", "volume_ratio")
DEFAULT_MV_INDICES = ("c_py_M", "c_pyk_M", "c_pTk_M")
DEFAULT_MC_N = 1_000_000
DEFAULT_B = 1000
DEFAULT_LEVEL = 0.90
_TOP_KEYS = {"schema_version", "spec", "L", "U", "T", "desired", "model", "interpolate_quantiles",
             "indices", "monte_carlo", "bootstrap", "multivariate"}


@dataclass(frozen=True)
class MonteCarloOptions:
    n: int = DEFAULT_MC_N
    seed: int | None = None
    workers: int = 1


@dataclass(frozen=True)
class BootstrapOptions:
    B: int = DEFAULT_B
    level: float = DEFAULT_LEVEL
    seed: int | None = None


@dataclass
class MultivariateOptions:
    spec: MvSpec
    structural: list
    families: tuple
    significance: float
    desired: DesiredRegion
    indices: list
    model: MvNormal | None = None
    p_nc: float = 0.0027


@dataclass
class AnalysisConfig:
    spec: SpecLimits | None
    desired: DesiredRegion = field(default_factory=DesiredRegion)
    model: object = "fit:auto"
    indices: list = field(default_factory=list)
    monte_carlo: MonteCarloOptions | None = None
    bootstrap: BootstrapOptions | None = None
    multivariate: MultivariateOptions | None = None
    interpolate_quantiles: bool = False
    defaults_applied: list = field(default_factory=list)
    raw: dict = field(default_factory=dict)

    def echo(self):
        """Normalized view of the configuration for report headers."""
        out = {
            "spec": None if self.spec is None else self.spec.to_dict(),
            "desired": self.desired.to_dict(),
            "model": self.model,
            "interpolate_quantiles": self.interpolate_quantiles,
            "indices": [r.to_dict() for r in self.indices],
        }
        if self.monte_carlo is not None:
            out["monte_carlo"] = {"n": self.monte_carlo.n, "seed": self.monte_carlo.seed,
                                  "workers": self.monte_carlo.workers}
        if self.bootstrap is not None:
            out["bootstrap"] = {"B": self.bootstrap.B, "level": self.bootstrap.level,
                                "seed": self.bootstrap.seed}
        if self.multivariate is not None:
            mv = self.multivariate
            out["multivariate"] = {
                "spec": mv.spec.to_dict(),
                "structural": [n.to_dict() for n in mv.structural],
                "families": list(mv.families),
                "significance": mv.significance,
                "desired": mv.desired.to_dict(),
                "indices": [r.to_dict() for r in mv.indices],
                "p_nc": mv.p_nc,
                "model": None if mv.model is None else mv.model.to_dict(),
            }
        return out


def _number(where, value, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where} must be a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{where} must be finite, got {value!r}")
    if integer and value != int(value):
        raise ConfigError(f"{where} must be an integer, got {value!r}")
    return int(value) if integer else float(value)


def _seed(where, value):
    if value is None:
        return None
    seed = _number(where, value, integer=True)
    if seed < 0:
        raise ConfigError(f"{where} must be a non-negative integer, got {value!r}")
    return seed


def _mapping(where, value):
    if not isinstance(value, dict):
        raise ConfigError(f"{where} must be an object, got {type(value).__name__}")
    return value


def _spec(raw):
    block = raw.get("spec")
    if block is not None:
        block = _mapping("spec", block)
        if any(k in raw for k in ("L", "U", "T")):
            raise ConfigError("give the limits either at the top level or in 'spec', not both")
    else:
        block = {k: raw[k] for k in ("L", "U", "T") if k in raw}
    if not block:
        return None
    if "L" not in block or "U" not in block:
        raise ConfigError("specification needs both L and U")
    lower, upper = _number("L", block["L"]), _number("U", block["U"])
    if not lower < upper:
        raise ConfigError(f"specification needs L < U, got L={lower}, U={upper}")
    target = None if block.get("T") is None else _number("T", block["T"])
    try:
        return SpecLimits(lower, upper, target)
    except CapqError as exc:
        raise ConfigError(f"invalid specification: {exc}") from None


def _desired(where, block, defaults):
    if block is None:
        defaults.append(f"{where} = alpha1 = alpha2 = {DEFAULT_TAIL}")
        return DesiredRegion()
    block = _mapping(where, block)
    unknown = set(block) - {"LDL", "UDL", "alpha1", "alpha2"}
    if unknown:
        raise ConfigError(f"{where} has unknown keys {sorted(unknown)}")
    try:
        if "LDL" in block or "UDL" in block:
            if "alpha1" in block or "alpha2" in block:
                raise ConfigError(f"{where}: give either LDL/UDL or alpha1/alpha2")
            return DesiredRegion.from_limits(_number("LDL", block.get("LDL")), _number("UDL", block.get("UDL")))
        for k in ("alpha1", "alpha2"):
            if k not in block:
                defaults.append(f"{where}.{k} = {DEFAULT_TAIL}")
        a1 = _number("alpha1", block.get("alpha1", DEFAULT_TAIL))
        a2 = _number("alpha2", block.get("alpha2", DEFAULT_TAIL))
        return DesiredRegion.from_tails(a1, a2)
    except ConfigError:
        raise
    except CapqError as exc:
        raise ConfigError(f"invalid {where}: {exc}") from None


def _model(value, defaults):
    if value is None:
        defaults.append("model = 'fit:auto'")
        return "fit:auto"
    if isinstance(value, str):
        if value in ("fit:auto", "empirical") or value in FAMILIES:
            return value
        raise ConfigError(f"unknown model directive {value!r}; use 'fit:auto', 'empirical' or one of "
                          f"{', '.join(f for f in FAMILIES if f != 'empirical')}")
    value = _mapping("model", value)
    if "family" not in value:
        raise ConfigError("a fixed model needs a 'family'")
    params = _mapping("model.params", value.get("params", {}))
    try:
        ProcessModel.from_spec(value["family"], params)
    except CapqError as exc:
        raise ConfigError(f"invalid model: {exc}") from None
    return {"family": value["family"], "params": dict(params)}


def _indices(values, defaults):
    if values is None:
        defaults.append(f"indices = {list(DEFAULT_INDICES)}")
        values = list(DEFAULT_INDICES)
    if not isinstance(values, list) or not values:
        raise ConfigError("indices must be a non-empty list")
    requests, seen = [], set()
    for item in values:
        request = as_request(item)
        key = request_label(request)
        if key in seen:
            raise ConfigError(f"index {key} requested twice")
        seen.add(key)
        _, applied = resolve_params(request)
        defaults.extend(applied)
        requests.append(request)
    return requests


def _monte_carlo(block, defaults):
    if block is None:
        return None
    block = _mapping("monte_carlo", block)
    unknown = set(block) - {"n", "seed", "workers"}
    if unknown:
        raise ConfigError(f"monte_carlo has unknown keys {sorted(unknown)}")
    if "n" not in block:
        defaults.append(f"monte_carlo.n = {DEFAULT_MC_N}")
    n = _number("monte_carlo.n", block.get("n", DEFAULT_MC_N), integer=True)
    workers = _number("monte_carlo.workers", block.get("workers", 1), integer=True)
    if n < 10_000:
        raise ConfigError(f"monte_carlo.n must be >= 10000, got {n}")
    if workers < 1:
        raise ConfigError("monte_carlo.workers must be >= 1")
    return MonteCarloOptions(n, _seed("monte_carlo.seed", block.get("seed")), workers)


def _bootstrap(block, defaults):
    if block is None:
        return None
    block = _mapping("bootstrap", block)
    unknown = set(block) - {"B", "level", "seed"}
    if unknown:
        raise ConfigError(f"bootstrap has unknown keys {sorted(unknown)}")
    for key, default in (("B", DEFAULT_B), ("level", DEFAULT_LEVEL)):
        if key not in block:
            defaults.append(f"bootstrap.{key} = {default}")
    B = _number("bootstrap.B", block.get("B", DEFAULT_B), integer=True)
    level = _number("bootstrap.level", block.get("level", DEFAULT_LEVEL))
    if B < 200:
        raise ConfigError(f"bootstrap.B must be >= 200, got {B}")
    if not 0 < level < 1:
        raise ConfigError(f"bootstrap.level must lie in (0, 1), got {level}")
    seed = _seed("bootstrap.seed", block.get("seed"))
    if seed is None:
        raise ConfigError("bootstrap requires a seed (bootstrap.seed or --seed)")
    return BootstrapOptions(B, level, seed)


def _structural(item):
    if isinstance(item, str):
        item = {"kind": item}
    item = _mapping("multivariate.structural entry", item)
    try:
        return StructuralFunction(item.get("kind"), item.get("weights"))
    except CapqError as exc:
        raise ConfigError(f"invalid structural function {item!r}: {exc}") from None


def _mv_indices(values, defaults):
    if values is None:
        defaults.append(f"multivariate.indices = {list(DEFAULT_MV_INDICES)}")
        values = list(DEFAULT_MV_INDICES)
    if not isinstance(values, list) or not values:
        raise ConfigError("multivariate.indices must be a non-empty list")
    out = []
    for item in values:
        request = as_request(item)
        if request.name not in MV_INDICES:
            raise ConfigError(f"unknown multivariate index {request.name!r}; valid: {', '.join(MV_INDICES)}")
        if request.name == "volume_ratio":
            if set(request.params) != {"level"}:
                raise ConfigError("volume_ratio takes exactly one parameter, 'level'")
            if not _number("volume_ratio.level", request.params["level"]) > 0:
                raise ConfigError("volume_ratio.level must be > 0")
        elif request.params:
            raise ConfigError(f"{request.name} takes no parameters")
        out.append(request)
    return out


def _multivariate(block, defaults):
    if block is None:
        return None
    block = _mapping("multivariate", block)
    unknown = set(block) - {"L", "U", "T", "structural", "families", "significance", "desired", "indices",
                            "model", "p_nc"}
    if unknown:
        raise ConfigError(f"multivariate has unknown keys {sorted(unknown)}")
    if "L" not in block or "U" not in block:
        raise ConfigError("multivariate block needs limit vectors L and U")
    try:
        spec = MvSpec(block["L"], block["U"], block.get("T"))
    except (CapqError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid multivariate specification: {exc}") from None

    structural = block.get("structural")
    if structural is None:
        defaults.append("multivariate.structural = ['max']")
        structural = ["max"]
    if not isinstance(structural, list) or not structural:
        raise ConfigError("multivariate.structural must be a non-empty list")
    structural = [_structural(s) for s in structural]

    families = block.get("families")
    if families is None:
        defaults.append(f"multivariate.families = {list(AUTO_FAMILIES)}")
        families = list(AUTO_FAMILIES)
    if not isinstance(families, list) or not families:
        raise ConfigError("multivariate.families must be a non-empty list")
    for fam in families:
        if fam not in FAMILIES:
            raise ConfigError(f"unknown family {fam!r}; expected one of {', '.join(FAMILIES)}")

    if "significance" not in block:
        defaults.append("multivariate.significance = 0.05")
    significance = _number("multivariate.significance", block.get("significance", 0.05))
    if not 0 < significance < 1:
        raise ConfigError("multivariate.significance must lie in (0, 1)")
    if "p_nc" not in block:
        defaults.append("multivariate.p_nc = 0.0027")
    p_nc = _number("multivariate.p_nc", block.get("p_nc", 0.0027))
    if not 0 < p_nc < 1:
        raise ConfigError("multivariate.p_nc must lie in (0, 1)")

    model = None
    if block.get("model") is not None:
        m = _mapping("multivariate.model", block["model"])
        try:
            model = MvNormal(m["mean"], m["cov"])
        except KeyError as exc:
            raise ConfigError(f"multivariate.model needs {exc}") from None
        except (CapqError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid multivariate model: {exc}") from None
        if model.dim != spec.dim:
            raise ConfigError(f"multivariate model has {model.dim} axes, the specification {spec.dim}")

    for n in structural:
        if n.kind == "weighted_sum" and n.weights.size != spec.dim:
            raise ConfigError(f"{n.label} has {n.weights.size} weights for {spec.dim} axes")
    desired = _desired("multivariate.desired", block.get("desired"), defaults)
    indices = _mv_indices(block.get("indices"), defaults)
    return MultivariateOptions(spec, structural, tuple(families), significance, desired, indices, model, p_nc)


def needs_monte_carlo_seed(config: AnalysisConfig) -> bool:
    mv = config.multivariate
    if mv is None:
        return False
    names = {r.name for r in mv.indices}
    if "shahriari" in names:
        return True
    if mv.model is not None:
        if "chen_mcp" in names:
            return True
        closed = mv.model.independent
        generalized = names & {"c_py_M", "c_pyk_M", "c_pTk_M"}
        if generalized and any(n.kind != "weighted_sum" for n in mv.structural) and not closed:
            return True
    return False


def apply_seed_override(raw: dict, seed) -> dict:
    """Copy of ``raw`` with every seed replaced by ``seed``."""
    raw = json.loads(json.dumps(raw))
    if seed is None:
        return raw
    for key in ("monte_carlo", "bootstrap"):
        if isinstance(raw.get(key), dict):
            raw[key]["seed"] = seed
    if "monte_carlo" not in raw and "multivariate" in raw:
        raw["monte_carlo"] = {"seed": seed}
    return raw


def config_from_dict(raw: dict, seed=None) -> AnalysisConfig:
    """Validate a parsed JSON configuration.  ``seed`` overrides all seeds."""
    raw = _mapping("configuration", raw)
    version = raw.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r}; expected {SCHEMA_VERSION}")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown configuration keys {sorted(unknown)}")
    raw = apply_seed_override(raw, seed)
    defaults = []
    spec = _spec(raw)
    desired = _desired("desired", raw.get("desired"), defaults)
    model = _model(raw.get("model"), defaults if spec is not None else [])
    interpolate = raw.get("interpolate_quantiles", False)
    if not isinstance(interpolate, bool):
        raise ConfigError("interpolate_quantiles must be true or false")
    multivariate = _multivariate(raw.get("multivariate"), defaults)
    if spec is None and multivariate is None:
        raise ConfigError("configuration needs a specification (L and U) or a multivariate block")
    indices = _indices(raw.get("indices"), defaults) if spec is not None else []
    if spec is not None and spec.target is None:
        defaults.append("T = M (specification midpoint) where a target is needed")
    config = AnalysisConfig(
        spec=spec, desired=desired, model=model, indices=indices,
        monte_carlo=_monte_carlo(raw.get("monte_carlo"), defaults),
        bootstrap=_bootstrap(raw.get("bootstrap"), defaults),
        multivariate=multivariate, interpolate_quantiles=interpolate,
        defaults_applied=defaults, raw=raw,
    )
    if needs_monte_carlo_seed(config) and (config.monte_carlo is None or config.monte_carlo.seed is None):
        raise ConfigError("the selected multivariate indices are stochastic; give monte_carlo.seed or --seed")
    return config


def load_config(path, seed=None) -> AnalysisConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"configuration {path} is not valid JSON: {exc}") from None
    return config_from_dict(raw, seed)


def request_label(request: IndexRequest) -> str:
    if not request.params:
        return request.name
    args = ", ".join(f"{k}={v}" for k, v in sorted(request.params.items()))
    return f"{request.name}({args})"

