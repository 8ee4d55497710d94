"""Quadratic per-period consumption utility and its inverse demand curve.

U(d) = a*d - (b/2)*d^2 gives the linear marginal utility U'(d) = a - b*d,
so the implied demand curve is linear in price.  The import/export
thresholds are the consumption levels where marginal utility crosses the
import and export prices.
"""

from __future__ import annotations

from dataclasses import dataclass

from .tariff import PeriodPrice


@dataclass(frozen=True)
class QuadraticUtility:
    """Strictly concave quadratic utility with intercept a and slope b."""

    a: float  # $/kWh, marginal utility at zero consumption
    b: float  # $/kWh^2, slope of marginal utility (> 0)

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise ValueError(f"require a > 0 and b > 0, got a={self.a}, b={self.b}")

    @property
    def d_max(self) -> float:
        """Satiation consumption where marginal utility reaches zero."""
        return self.a / self.b

    def value(self, d):
        return self.a * d - 0.5 * self.b * d * d

    def marginal(self, d):
        return self.a - self.b * d

    def curvature(self, d=None) -> float:
        """Second derivative; constant -b for the quadratic family."""
        return -self.b

    def inverse_marginal(self, price):
        """Consumption where marginal utility equals ``price``, clamped at 0."""
        return max(0.0, (self.a - price) / self.b)


@dataclass(frozen=True)
class Thresholds:
    """Import/export consumption thresholds for one period (kWh)."""

    d_plus: float
    d_minus: float

    def __post_init__(self):
        if not 0.0 <= self.d_plus <= self.d_minus:
            raise ValueError(
                f"require 0 <= d_plus <= d_minus, got ({self.d_plus}, {self.d_minus})"
            )


def utility(u: QuadraticUtility, d: float) -> float:
    """Utility of consuming ``d`` kWh."""
    if d < 0:
        raise ValueError(f"negative consumption: {d}")
    return u.value(d)


def inverse_demand(u: QuadraticUtility, price: float) -> float:
    """Consumption demanded at ``price``; zero above the choke price a."""
    return u.inverse_marginal(price)


def is_choked(u: QuadraticUtility, price: float) -> bool:
    """True when the price is at or above the choke price (zero demand)."""
    return price >= u.a


def thresholds(u: QuadraticUtility, p: PeriodPrice) -> Thresholds:
    """Import/export thresholds implied by a validated price pair."""
    return Thresholds(
        d_plus=inverse_demand(u, p.import_price),
        d_minus=inverse_demand(u, p.export_price),
    )


def calibrate(d0: float, pi0: float, elasticity: float) -> QuadraticUtility:
    """Calibrate a quadratic utility from an anchor point and elasticity.

    Fits the linear demand curve through (pi0, d0) with point elasticity
    ``elasticity`` at the anchor.  The intercept a = pi0 * (1 - 1/e) is
    independent of d0; the slope is b = -pi0 / (e * d0).
    """
    if d0 <= 0:
        raise ValueError(f"anchor consumption must be positive, got {d0}")
    if pi0 <= 0:
        raise ValueError(f"anchor price must be positive, got {pi0}")
    if elasticity >= 0:
        raise ValueError(f"elasticity must be negative, got {elasticity}")
    b = -pi0 / (elasticity * d0)
    a = pi0 + b * d0
    return QuadraticUtility(a=a, b=b)
