"""Closed-form optimal prosumer operation for a given capacity and output.

For each period, consumption is the generation level clamped to the
import/export thresholds: below the import threshold the prosumer tops
up from the grid, above the export threshold it sells the excess, and in
between it self-consumes exactly its own generation (net-zero).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .stochastic import CapacityFactorDist, PiecewiseIntegrand, expect
from .tariff import PeriodPrice, ValidatedSchedule
from .utility import QuadraticUtility, Thresholds, thresholds


class Regime(str, enum.Enum):
    IMPORT = "import"
    NET_ZERO = "net_zero"
    EXPORT = "export"


@dataclass(frozen=True)
class DispatchResult:
    """Optimal per-period operation for one realized capacity factor."""

    consumption: float
    imports: float
    exports: float
    regime: Regime
    period_payment: float  # pi+ * imports - pi- * exports, excl. fixed charge
    period_utility: float


@dataclass(frozen=True)
class ExpectedQuantities:
    """Per-period expectations of the optimal dispatch over psi."""

    consumption: float
    imports: float
    exports: float
    payment: float
    utility: float


def optimal_dispatch(
    u: QuadraticUtility, p: PeriodPrice, g: float, psi: float
) -> DispatchResult:
    """Closed-form optimal operation given capacity ``g`` and realization ``psi``.

    Boundary ties (generation exactly at a threshold) classify as
    net-zero, matching the closed net-zero interval.
    """
    if g < 0:
        raise ValueError(f"negative capacity: {g}")
    if psi < 0:
        raise ValueError(f"negative capacity factor: {psi}")
    th = thresholds(u, p)
    s = g * psi
    if s < th.d_plus:
        d, imp, exp, regime = th.d_plus, th.d_plus - s, 0.0, Regime.IMPORT
    elif s > th.d_minus:
        d, imp, exp, regime = th.d_minus, 0.0, s - th.d_minus, Regime.EXPORT
    else:
        d, imp, exp, regime = s, 0.0, 0.0, Regime.NET_ZERO
    return DispatchResult(
        consumption=d,
        imports=imp,
        exports=exp,
        regime=regime,
        period_payment=p.import_price * imp - p.export_price * exp,
        period_utility=u.value(d),
    )


def payment(
    schedule: ValidatedSchedule, dispatches: Mapping[int, DispatchResult]
) -> float:
    """Total realized NEM payment: fixed charge plus net energy charges."""
    if set(dispatches) != set(range(schedule.n_periods)):
        raise ValueError("need exactly one dispatch per settlement period")
    total = schedule.fixed_charge
    for t, res in dispatches.items():
        p = schedule.price(t)
        total += p.import_price * res.imports - p.export_price * res.exports
    return total


def regime_breakpoints(th: Thresholds, g: float) -> tuple[float, ...]:
    """Psi values where the dispatch regime changes, for breakpoint insertion."""
    if g <= 0:
        return ()
    return (th.d_plus / g, th.d_minus / g)


def consumption_fn(th: Thresholds, g: float):
    """Vectorized optimal consumption as a function of psi."""
    return lambda psi: np.clip(g * psi, th.d_plus, th.d_minus)


def imports_fn(th: Thresholds, g: float):
    return lambda psi: np.maximum(th.d_plus - g * psi, 0.0)


def exports_fn(th: Thresholds, g: float):
    return lambda psi: np.maximum(g * psi - th.d_minus, 0.0)


def expected_period_quantities(
    u: QuadraticUtility,
    p: PeriodPrice,
    dist: CapacityFactorDist,
    g: float,
) -> ExpectedQuantities:
    """Expectations of consumption, trade, payment, and utility over psi."""
    th = thresholds(u, p)
    bps = regime_breakpoints(th, g)
    cons = consumption_fn(th, g)
    e_d = expect(dist, PiecewiseIntegrand(cons, bps))
    e_imp = expect(dist, PiecewiseIntegrand(imports_fn(th, g), bps))
    e_exp = expect(dist, PiecewiseIntegrand(exports_fn(th, g), bps))
    e_util = expect(dist, PiecewiseIntegrand(lambda x: u.value(cons(x)), bps))
    return ExpectedQuantities(
        consumption=e_d,
        imports=e_imp,
        exports=e_exp,
        payment=p.import_price * e_imp - p.export_price * e_exp,
        utility=e_util,
    )


def surplus(
    schedule: ValidatedSchedule,
    utilities: Mapping[int, QuadraticUtility],
    dists: Mapping[int, CapacityFactorDist],
    g: float,
    c_g: float,
) -> float:
    """Expected prosumer surplus at capacity ``g``.

    Sum over periods of E[U(d*) - pi+ d+* + pi- d-*], less the
    annualized capacity cost and the fixed charge.
    """
    total = -c_g * g - schedule.fixed_charge
    for t in range(schedule.n_periods):
        q = expected_period_quantities(
            utilities[t], schedule.price(t), dists[t], g
        )
        total += q.utility - q.payment
    return total
