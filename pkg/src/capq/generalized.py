"""Yield-ratio capability indices C_py, C_pyk and C_pTk.

C_py compares the specification yield p with the desired yield p0.  C_pyk
splits both at the process median and keeps the worse half; C_pTk splits at
the target instead.  Everything is expressed through the model CDF, so the
same code serves continuous, discrete and empirical models.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

from capq.classical import SpecLimits
from capq.errors import DomainError
from capq.yield_based import DesiredRegion, yield_summary


@dataclass(frozen=True)
class GeneralizedInputs:
    spec: SpecLimits
    model: object
    desired: DesiredRegion = DesiredRegion()
    target: float | None = None

    def target_value(self):
        if self.target is not None:
            return self.target
        return self.spec.target


class SplitIndex(NamedTuple):
    """A min-of-two-halves index with its upper and lower components."""

    value: float
    upper: float
    lower: float


def c_py(inputs: GeneralizedInputs, linear_extension: bool = False) -> float:
    """``p / p0``.

    With ``linear_extension`` (uniform models only) the CDF is extended
    linearly beyond the support, so desired limits outside (a, b) still give a
    proportional p0.
    """
    model, spec, desired = inputs.model, inputs.spec, inputs.desired
    if linear_extension:
        if not hasattr(model, "cdf_linear"):
            raise DomainError("linear extension is only defined for uniform models")
        ldl, udl = desired.limits(model)
        p = float(model.cdf_linear(spec.upper) - model.cdf_linear(spec.lower))
        p0 = float(model.cdf_linear(udl) - model.cdf_linear(ldl))
    else:
        p = yield_summary(model, spec).p
        p0 = desired.p0(model)
    if not p0 > 0:
        raise DomainError(f"desired yield p0 must be > 0, got {p0}")
    return p / p0


def split_at_level(model, spec: SpecLimits, desired: DesiredRegion, f_pivot: float) -> SplitIndex:
    """Both halves of the yield ratio, split where the CDF equals ``f_pivot``."""
    a1, a2 = desired.tails(model)
    den_u, den_l = 0.5 - a2, 0.5 - a1
    if not (den_u > 0 and den_l > 0):
        raise DomainError(f"tail proportions must be < 1/2, got alpha1={a1}, alpha2={a2}")
    upper = (float(model.cdf(spec.upper)) - f_pivot) / den_u
    lower = (f_pivot - float(model.cdf(spec.lower))) / den_l
    return SplitIndex(min(upper, lower), upper, lower)


def _split(model, spec, desired, pivot) -> SplitIndex:
    return split_at_level(model, spec, desired, float(model.cdf(pivot)))


def c_pyk(inputs: GeneralizedInputs) -> SplitIndex:
    """Split at the median: ``min((F(U)-F(m))/(1/2-a2), (F(m)-F(L))/(1/2-a1))``."""
    return _split(inputs.model, inputs.spec, inputs.desired, inputs.model.median())


def c_ptk(inputs: GeneralizedInputs) -> SplitIndex:
    """As :func:`c_pyk` with the split taken at the target T."""
    target = inputs.target_value()
    if target is None:
        raise DomainError("C_pTk needs a target value")
    return _split(inputs.model, inputs.spec, inputs.desired, target)


def c_pyk_symmetric(inputs: GeneralizedInputs) -> float:
    """Closed form of C_pyk for equal tails, in probability units.

    ``((F(U) - F(L))/2 - |F(M~) - 1/2|) / ((1 - alpha)/2)`` with
    ``F(M~) = (F(L) + F(U))/2``.  Agrees with :func:`c_pyk` whenever the
    median satisfies F(median) = 1/2.
    """
    a1, a2 = inputs.desired.tails(inputs.model)
    f_l = float(inputs.model.cdf(inputs.spec.lower))
    f_u = float(inputs.model.cdf(inputs.spec.upper))
    half_yield = 0.5 * (f_u - f_l)
    return (half_yield - abs(0.5 * (f_l + f_u) - 0.5)) / (0.5 * (1.0 - a1 - a2))
