"""Moment-based capability indices.

All functions take the engineering tolerance as :class:`SpecLimits` and the
process location/spread as :class:`ProcessMoments`.  When the target ``T`` is
absent it defaults to the specification midpoint ``M``; callers that need to
know whether that happened can check ``spec.target is None``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

from capq import kernels
from capq.errors import ConfigError, DomainError


@dataclass(frozen=True)
class SpecLimits:
    """Specification interval [lower, upper] with an optional target."""

    lower: float
    upper: float
    target: float | None = None

    def __post_init__(self):
        for name in ("lower", "upper"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise DomainError(f"{name} specification limit must be finite, got {value}")
        if not self.lower < self.upper:
            raise DomainError(f"specification requires L < U, got L={self.lower}, U={self.upper}")
        if self.target is not None and not self.lower <= self.target <= self.upper:
            raise DomainError(f"target T={self.target} lies outside [L, U]")

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lower + self.upper)

    @property
    def half_width(self) -> float:
        return 0.5 * (self.upper - self.lower)

    def target_or_mid(self) -> float:
        return self.midpoint if self.target is None else self.target

    def affine(self, scale: float, shift: float) -> SpecLimits:
        """Image under x -> scale * x + shift (scale > 0)."""
        t = None if self.target is None else scale * self.target + shift
        return SpecLimits(scale * self.lower + shift, scale * self.upper + shift, t)

    def to_dict(self):
        return {"L": self.lower, "U": self.upper, "T": self.target}


@dataclass(frozen=True)
class ProcessMoments:
    mu: float
    sigma: float

    def __post_init__(self):
        if not math.isfinite(self.mu):
            raise DomainError(f"process mean must be finite, got {self.mu}")
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise DomainError(f"process sigma must be finite and > 0, got {self.sigma}")

    @classmethod
    def of(cls, model) -> ProcessMoments:
        """Mean and standard deviation of a process model."""
        return cls(model.mean(), model.sd())


class BasicIndices(NamedTuple):
    c_p: float
    c_pk: float
    c_pm: float
    c_pmk: float


def _target(spec: SpecLimits, default_target: bool) -> float:
    if spec.target is None and not default_target:
        raise ConfigError("target T is required (default to the midpoint is disabled)")
    return spec.target_or_mid()


def basic_indices(spec: SpecLimits, mom: ProcessMoments, default_target: bool = True) -> BasicIndices:
    """C_p, C_pk, C_pm and C_pmk.

    C_pk and C_pmk use the one-sided minimum form
    ``min(U - mu, mu - L) / (3 * scale)``.
    """
    target = _target(spec, default_target)
    mu, sigma = mom.mu, mom.sigma
    width = spec.upper - spec.lower
    tau = math.sqrt(sigma * sigma + (mu - target) ** 2)
    nearest = min(spec.upper - mu, mu - spec.lower)
    return BasicIndices(
        c_p=width / (6.0 * sigma),
        c_pk=nearest / (3.0 * sigma),
        c_pm=width / (6.0 * tau),
        c_pmk=nearest / (3.0 * tau),
    )


def s_pk(spec: SpecLimits, mom: ProcessMoments) -> float:
    """Boyles' yield-matched index ``Phi^-1((Phi(a) + Phi(b)) / 2) / 3``.

    Evaluated through the upper tails, ``-Phi^-1((Phi(-a) + Phi(-b)) / 2) / 3``,
    so capable processes keep full precision.  Returns ``inf`` when the
    combined tail underflows to zero.
    """
    a = (spec.upper - mom.mu) / mom.sigma
    b = (mom.mu - spec.lower) / mom.sigma
    tail = 0.5 * kernels.norm_sf(a) + 0.5 * kernels.norm_sf(b)
    if tail <= 0.0:
        return math.inf
    return kernels.norm_isf(tail) / 3.0


def vannman(spec: SpecLimits, mom: ProcessMoments, u: float, v: float) -> float:
    """Two-parameter family ``(d - u|mu - M|) / (3 sqrt(sigma^2 + v (mu - T)^2))``.

    ``(0,0), (1,0), (0,1), (1,1)`` give C_p, C_pk, C_pm, C_pmk.
    """
    if u < 0 or v < 0:
        raise DomainError(f"u and v must be non-negative, got u={u}, v={v}")
    target = spec.target_or_mid()
    num = spec.half_width - u * abs(mom.mu - spec.midpoint)
    return num / (3.0 * math.sqrt(mom.sigma ** 2 + v * (mom.mu - target) ** 2))


def spiring_cpw(spec: SpecLimits, mom: ProcessMoments, g: Callable[[float], float]) -> float:
    """C_p penalised by a loss of the standardized offset: ``C_p / sqrt(1 + g(delta))``.

    ``delta = (mu - T) / sigma``.  With ``g(delta) = w * delta**2`` this equals
    ``vannman(spec, mom, 0, w)``.
    """
    if g(0.0) != 0.0:
        raise DomainError(f"g(0) must be 0, got {g(0.0)}")
    delta = (mom.mu - spec.target_or_mid()) / mom.sigma
    penalty = g(delta)
    if not penalty >= 0.0:
        raise DomainError(f"g must be non-negative, got g({delta}) = {penalty}")
    c_p = (spec.upper - spec.lower) / (6.0 * mom.sigma)
    return c_p / math.sqrt(1.0 + penalty)


def quadratic_loss(w: float) -> Callable[[float], float]:
    """``g(delta) = w * delta**2``; the usual choice for :func:`spiring_cpw`."""
    if w < 0:
        raise DomainError(f"weight must be non-negative, got {w}")
    return lambda delta: w * delta * delta
