"""Quantile- and conformance-based indices for arbitrary process models.

Models are any objects with the :class:`capq.dist_core.ProcessModel`
surface.  For discrete models the yield counts both endpoints,
``P(L <= X <= U)``.  Indices that blow up (a process with no nonconforming
mass) return ``math.inf``; reports turn that into a null value plus an
``infinite`` flag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from capq import kernels
from capq.classical import SpecLimits
from capq.errors import DomainError

# Phi(-3): the 0.135% point, so that the quantile spread of a normal is 6 sigma
CLEMENTS_A = 0.5 * math.erfc(3.0 / math.sqrt(2.0))
DEFAULT_TAIL = 0.00135
DEFAULT_P0 = 0.9973


class YieldSummary(NamedTuple):
    p: float
    p_nc: float
    lower_nc: float
    upper_nc: float


@dataclass(frozen=True)
class DesiredRegion:
    """Natural tolerance, either as limits (LDL, UDL) or as tail proportions.

    Use :meth:`from_limits` or :meth:`from_tails`; the bare constructor with
    no arguments gives the ±3 sigma normal convention, alpha1 = alpha2 = 0.00135.
    """

    ldl: float | None = None
    udl: float | None = None
    alpha1: float | None = None
    alpha2: float | None = None

    def __post_init__(self):
        limits = self.ldl is not None or self.udl is not None
        tails = self.alpha1 is not None or self.alpha2 is not None
        if limits and tails:
            raise DomainError("give either desired limits or tail proportions, not both")
        if limits:
            if self.ldl is None or self.udl is None or not self.ldl < self.udl:
                raise DomainError(f"desired limits require LDL < UDL, got {self.ldl}, {self.udl}")
        else:
            a1 = DEFAULT_TAIL if self.alpha1 is None else self.alpha1
            a2 = DEFAULT_TAIL if self.alpha2 is None else self.alpha2
            if a1 < 0 or a2 < 0 or a1 + a2 >= 1:
                raise DomainError(f"tail proportions need alpha1, alpha2 >= 0 and alpha1 + alpha2 < 1, "
                                  f"got {a1}, {a2}")
            object.__setattr__(self, "alpha1", float(a1))
            object.__setattr__(self, "alpha2", float(a2))

    @classmethod
    def from_limits(cls, ldl, udl) -> DesiredRegion:
        return cls(ldl=float(ldl), udl=float(udl))

    @classmethod
    def from_tails(cls, alpha1=DEFAULT_TAIL, alpha2=DEFAULT_TAIL) -> DesiredRegion:
        return cls(alpha1=float(alpha1), alpha2=float(alpha2))

    @property
    def explicit(self) -> bool:
        return self.ldl is not None

    def tails(self, model) -> tuple[float, float]:
        """(alpha1, alpha2) = (P(X < LDL), P(X > UDL))."""
        if not self.explicit:
            return self.alpha1, self.alpha2
        return model.cdf_left(self.ldl), model.sf(self.udl)

    def limits(self, model) -> tuple[float, float]:
        """(LDL, UDL), via the model's quantiles in the tail-proportion form."""
        if self.explicit:
            return self.ldl, self.udl
        lo = model.support[0] if self.alpha1 == 0 else model.quantile(self.alpha1)
        hi = model.support[1] if self.alpha2 == 0 else model.quantile(1.0 - self.alpha2)
        return lo, hi

    def p0(self, model) -> float:
        if not self.explicit:
            return 1.0 - self.alpha1 - self.alpha2
        a1, a2 = self.tails(model)
        return max(0.0, 1.0 - a1 - a2)

    def to_dict(self):
        if self.explicit:
            return {"LDL": self.ldl, "UDL": self.udl}
        return {"alpha1": self.alpha1, "alpha2": self.alpha2}


def yield_summary(model, spec: SpecLimits) -> YieldSummary:
    """Conforming fraction and both nonconforming tails.

    ``lower_nc = P(X < L)`` and ``upper_nc = P(X > U)`` are evaluated directly
    from the model's tails, and ``p = 1 - lower_nc - upper_nc``.
    """
    lower = float(model.cdf_left(spec.lower))
    upper = float(model.sf(spec.upper))
    p_nc = min(1.0, lower + upper)
    return YieldSummary(p=1.0 - p_nc, p_nc=p_nc, lower_nc=lower, upper_nc=upper)


def mukherjee_i(spec: SpecLimits, model, alpha1: float, alpha2: float) -> float:
    """Specification width over the (alpha1, 1 - alpha2) inter-quantile range."""
    if alpha1 < 0 or alpha2 < 0 or alpha1 + alpha2 >= 1:
        raise DomainError(f"need alpha1, alpha2 >= 0 and alpha1 + alpha2 < 1, got {alpha1}, {alpha2}")
    if alpha1 == 0 or alpha2 == 0:
        raise DomainError("tail proportions must be > 0 for a finite quantile range")
    spread = model.quantile(1.0 - alpha2) - model.quantile(alpha1)
    if not spread > 0:
        raise DomainError(f"degenerate quantile spread {spread} for {model!r}")
    return (spec.upper - spec.lower) / spread


def clements_cp(spec: SpecLimits, model, a: float = CLEMENTS_A) -> float:
    """``(U - L) / (xi_{1-a} - xi_a)``, the quantile analogue of C_p."""
    if not 0 < a < 0.5:
        raise DomainError(f"a must lie in (0, 0.5), got {a}")
    return mukherjee_i(spec, model, a, a)


def _ratio(num: float, den: float) -> float:
    return math.inf if den <= 0.0 else num / den


def yb_ratio(p0_nc: float, model, spec: SpecLimits) -> float:
    """Yeh-Bhattacharya ratio of tolerated to actual nonconforming fraction."""
    if not 0 < p0_nc < 1:
        raise DomainError(f"tolerated nonconforming fraction must lie in (0, 1), got {p0_nc}")
    return _ratio(p0_nc, yield_summary(model, spec).p_nc)


def yb_cf(alpha0_lower: float, alpha0_upper: float, model, spec: SpecLimits) -> float:
    """Worse of the two one-sided tolerated/actual nonconforming ratios."""
    for name, value in (("alpha0_L", alpha0_lower), ("alpha0_U", alpha0_upper)):
        if not 0 < value < 1:
            raise DomainError(f"{name} must lie in (0, 1), got {value}")
    ys = yield_summary(model, spec)
    return min(_ratio(alpha0_lower, ys.lower_nc), _ratio(alpha0_upper, ys.upper_nc))


def borges_ho_c(model, spec: SpecLimits) -> float:
    """C_p of the centered normal process with the same nonconforming fraction."""
    pi = yield_summary(model, spec).p_nc
    if pi <= 0.0:
        return math.inf
    return kernels.norm_isf(0.5 * pi) / 3.0


def perakis_cpc(p0: float, model, spec: SpecLimits) -> float:
    """``(1 - p0) / (1 - p)``: allowed over actual nonconforming fraction."""
    if not 0 < p0 < 1:
        raise DomainError(f"minimum conforming proportion must lie in (0, 1), got {p0}")
    return _ratio(1.0 - p0, yield_summary(model, spec).p_nc)
