"""Marginal value of PV capacity and the optimal investment solver.

The marginal value F(g) of one extra kW is the capacity-factor-weighted
mix of avoided imports (at the import price), extra self-consumption
(at marginal utility), and exports (at the export price), summed over
generating periods.  F is constant on an initial flat region and weakly
decreasing afterwards, so the optimality condition F(g) = c_g is solved
by bisection.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .dispatch import regime_breakpoints
from .stochastic import PiecewiseIntegrand, expect
from .utility import thresholds

if TYPE_CHECKING:
    from .scenario import Scenario

#: Absolute tolerance on |c_g - F(0)| for the set-valued classification.
SET_VALUED_TOL = 1e-9
#: Relative bisection width tolerance, as a fraction of g_max.
DEFAULT_XTOL_REL = 1e-8


class Classification(str, enum.Enum):
    INTERIOR = "interior"
    AT_ZERO = "at_zero"
    AT_MAX = "at_max"
    SET_VALUED = "set_valued"


@dataclass(frozen=True)
class InvestmentResult:
    """Optimal PV capacity with uniqueness/boundary classification."""

    g_star: float
    classification: Classification
    interval: tuple[float, float]
    g_dagger: float | None
    F_at_gstar: float


def _marginal_value_fn(u, p, th, g):
    """Vectorized psi * (regime-dependent marginal value of generation)."""

    def f(psi):
        s = g * psi
        value = np.where(
            s < th.d_plus,
            p.import_price,
            np.where(s > th.d_minus, p.export_price, u.marginal(s)),
        )
        return psi * value

    return f


def marginal_value(scenario: "Scenario", g: float) -> float:
    """F(g): expected value of one additional kW of PV capacity."""
    if g < 0:
        raise ValueError(f"negative capacity: {g}")
    total = 0.0
    for t in scenario.generating_periods():
        u = scenario.utilities[t]
        p = scenario.schedule.price(t)
        dist = scenario.dists[t]
        th = thresholds(u, p)
        f = PiecewiseIntegrand(
            _marginal_value_fn(u, p, th, g), regime_breakpoints(th, g)
        )
        total += expect(dist, f)
    return total


def marginal_value_curve(
    scenario: "Scenario", g_grid
) -> list[tuple[float, float]]:
    """Pointwise marginal value along a sorted nonnegative capacity grid."""
    grid = list(g_grid)
    if any(g < 0 for g in grid) or grid != sorted(grid):
        raise ValueError("capacity grid must be sorted and nonnegative")
    return [(g, marginal_value(scenario, g)) for g in grid]


def flat_bound(scenario: "Scenario") -> float:
    """Largest g with all generating periods surely importing.

    F is constant on [0, flat_bound].  Returns +inf when no period
    generates (F is identically zero there).
    """
    bounds = []
    for t in scenario.generating_periods():
        th = thresholds(scenario.utilities[t], scenario.schedule.price(t))
        support = scenario.dists[t].support_max
        bounds.append(th.d_plus / support)
    return min(bounds, default=math.inf)


def solve_capacity(
    scenario: "Scenario",
    c_g: float,
    g_max: float,
    set_tol: float = SET_VALUED_TOL,
    xtol_rel: float = DEFAULT_XTOL_REL,
) -> InvestmentResult:
    """Optimal capacity: the projection of the F(g) = c_g root onto [0, g_max].

    Classification follows the marginal-value geometry: cost above F(0)
    pins the optimum at zero, cost below F(g_max) at the cap, cost equal
    to F(0) (within ``set_tol``) yields the set-valued flat-region
    optimum, and otherwise bisection finds the unique interior root on
    the strictly decreasing branch.
    """
    if c_g < 0:
        raise ValueError(f"negative capacity cost: {c_g}")
    if g_max <= 0:
        raise ValueError(f"g_max must be positive, got {g_max}")

    f0 = marginal_value(scenario, 0.0)
    if not math.isfinite(f0):
        raise ValueError("non-finite marginal value at g=0")
    if c_g > f0 + set_tol:
        return InvestmentResult(0.0, Classification.AT_ZERO, (0.0, 0.0), None, f0)
    if abs(c_g - f0) <= set_tol:
        hi = min(flat_bound(scenario), g_max)
        return InvestmentResult(
            0.5 * hi, Classification.SET_VALUED, (0.0, hi), None, f0
        )
    f_max = marginal_value(scenario, g_max)
    if c_g < f_max - set_tol:
        return InvestmentResult(
            g_max, Classification.AT_MAX, (g_max, g_max), None, f_max
        )

    lo = min(flat_bound(scenario), g_max)
    hi = g_max
    xtol = xtol_rel * g_max
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        if marginal_value(scenario, mid) > c_g:
            lo = mid
        else:
            hi = mid
    g_dagger = 0.5 * (lo + hi)
    return InvestmentResult(
        g_dagger,
        Classification.INTERIOR,
        (g_dagger, g_dagger),
        g_dagger,
        marginal_value(scenario, g_dagger),
    )
