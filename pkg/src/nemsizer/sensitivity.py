"""Analytic comparative statics of the optimal PV capacity and payments.

Interior derivatives follow from implicit differentiation of the
optimality condition F(g*) = c_g: the denominator is the expected
curvature of utility over the net-zero region, the numerators are the
capacity-factor mass in the import/export regimes of the shocked
period.  Net-demand and payment responses decompose into a direct
(within-period) effect and a PV effect acting through the re-optimized
capacity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dispatch import optimal_dispatch, expected_period_quantities, regime_breakpoints
from .scenario import Scenario
from .sizing import (
    Classification,
    SET_VALUED_TOL,
    flat_bound,
    marginal_value,
    solve_capacity,
)
from .stochastic import PiecewiseIntegrand, expect, regime_probabilities
from .tariff import TariffError
from .utility import thresholds

#: Relative g-offset used for one-sided (left/right) regime evaluation.
_SIDE_DELTA = 1e-7
#: Tight solver tolerance for derivative work.
_TIGHT_XTOL = 1e-12

PARAM_IMPORT = "import_price"
PARAM_EXPORT = "export_price"
PARAM_COST = "pv_cost"


@dataclass(frozen=True)
class DerivativeReport:
    """dg*/d(parameter), with one-sided values at non-smooth points."""

    parameter: str
    period: int | None
    value: float | None
    left_value: float | None
    right_value: float | None
    case: str  # bounds | interior | entry_exit | kink
    infinite: bool = False


@dataclass(frozen=True)
class EffectDecomposition:
    """Direct (within-period) and PV (capacity-adjustment) effects."""

    direct: float
    pv: float

    @property
    def total(self) -> float:
        return self.direct + self.pv


def _curvature_denominator(scenario: Scenario, g: float) -> float:
    """E[sum over net-zero periods of psi^2 U''(psi g)], strict regimes."""
    total = 0.0
    for t in scenario.generating_periods():
        u = scenario.utilities[t]
        th = thresholds(u, scenario.schedule.price(t))

        def f(psi, th=th, b=u.b):
            s = g * psi
            return np.where((s > th.d_plus) & (s < th.d_minus),
                            -b * psi * psi, 0.0)

        total += expect(
            scenario.dists[t], PiecewiseIntegrand(f, regime_breakpoints(th, g))
        )
    return total


def _regime_mass(scenario: Scenario, tau: int, g: float, regime: str) -> float:
    """E[psi_tau * indicator of the import or export regime], strict."""
    th = thresholds(scenario.utilities[tau], scenario.schedule.price(tau))

    def f(psi):
        s = g * psi
        cond = s < th.d_plus if regime == "import" else s > th.d_minus
        return np.where(cond, psi, 0.0)

    return expect(
        scenario.dists[tau], PiecewiseIntegrand(f, regime_breakpoints(th, g))
    )


def _interior_value(
    scenario: Scenario, g: float, parameter: str, period: int | None
) -> float:
    denom = _curvature_denominator(scenario, g)
    if denom == 0.0:
        return float("inf")
    if parameter == PARAM_COST:
        return 1.0 / denom
    regime = "import" if parameter == PARAM_IMPORT else "export"
    return -_regime_mass(scenario, period, g, regime) / denom


def _check_parameter(parameter: str, period: int | None) -> None:
    if parameter not in (PARAM_IMPORT, PARAM_EXPORT, PARAM_COST):
        raise ValueError(f"unknown parameter: {parameter}")
    if parameter != PARAM_COST and period is None:
        raise ValueError(f"{parameter} requires a period index")


def dg_dparam(
    scenario: Scenario,
    c_g: float,
    g_max: float,
    parameter: str,
    period: int | None = None,
) -> DerivativeReport:
    """Sensitivity of the optimal capacity to a price or cost parameter.

    Capacity pinned at a bound gives zero; at entry/exit (c_g equal to
    F(0) or F(g_max)) only one-sided derivatives exist; interior
    solutions use the implicit-function formulas, with left/right
    directional values when g* sits at a regime kink.
    """
    _check_parameter(parameter, period)
    res = solve_capacity(scenario, c_g, g_max, xtol_rel=_TIGHT_XTOL)
    f0 = marginal_value(scenario, 0.0)
    f_cap = marginal_value(scenario, g_max)

    at_entry = abs(c_g - f0) <= SET_VALUED_TOL
    at_exit = abs(c_g - f_cap) <= SET_VALUED_TOL
    if at_entry or at_exit:
        if at_entry:
            g_lim = min(flat_bound(scenario), g_max) * (1.0 + _SIDE_DELTA)
        else:
            g_lim = g_max * (1.0 - _SIDE_DELTA)
        v = _interior_value(scenario, g_lim, parameter, period)
        infinite = not np.isfinite(v)
        v = None if infinite else v
        if parameter == PARAM_COST:
            # increasing cost keeps the boundary solution at entry
            left, right = (v, 0.0) if at_entry else (0.0, v)
        else:
            left, right = (0.0, v) if at_entry else (v, 0.0)
        return DerivativeReport(parameter, period, None, left, right,
                                "entry_exit", infinite)

    if res.classification in (Classification.AT_ZERO, Classification.AT_MAX):
        return DerivativeReport(parameter, period, 0.0, 0.0, 0.0, "bounds")

    g = res.g_star
    left = _interior_value(scenario, g * (1.0 - _SIDE_DELTA), parameter, period)
    right = _interior_value(scenario, g * (1.0 + _SIDE_DELTA), parameter, period)
    if not (np.isfinite(left) and np.isfinite(right)):
        return DerivativeReport(parameter, period, None, None, None,
                                "kink", infinite=True)
    scale = max(1.0, abs(left), abs(right))
    if abs(left - right) <= 1e-6 * scale:
        value = 0.5 * (left + right)
        return DerivativeReport(parameter, period, value, value, value,
                                "interior")
    # left != right can mean either a jump (true kink) or a steep but
    # smooth dependence on g; in the smooth case the center evaluation
    # bisects the one-sided values
    mid = _interior_value(scenario, g, parameter, period)
    if np.isfinite(mid) and abs(0.5 * (left + right) - mid) <= 0.1 * abs(left - right):
        return DerivativeReport(parameter, period, mid, mid, mid,
                                "interior")
    return DerivativeReport(parameter, period, None, left, right, "kink")


def net_demand_derivative(
    scenario: Scenario, c_g: float, g_max: float, tau: int, t: int
) -> EffectDecomposition:
    """d E[net demand of period t] / d import price of period tau.

    The direct effect moves the import threshold within period tau; the
    PV effect shifts net demand in every generating period through the
    capacity response.
    """
    rep = dg_dparam(scenario, c_g, g_max, PARAM_IMPORT, tau)
    dg = rep.value if rep.value is not None else 0.0
    res = solve_capacity(scenario, c_g, g_max, xtol_rel=_TIGHT_XTOL)
    g = res.g_star

    u_tau = scenario.utilities[tau]
    th_tau = thresholds(u_tau, scenario.schedule.price(tau))
    p_imp, _, _ = regime_probabilities(scenario.dists[tau], g, th_tau)
    direct = (p_imp / u_tau.curvature()) if t == tau else 0.0

    trade_mass = (
        _regime_mass(scenario, t, g, "import")
        + _regime_mass(scenario, t, g, "export")
    )
    return EffectDecomposition(direct=direct, pv=-trade_mass * dg)


def payment_derivative(
    scenario: Scenario,
    c_g: float,
    g_max: float,
    parameter: str,
    tau: int,
) -> EffectDecomposition:
    """d E[total NEM payment] / d (import or export price of period tau)."""
    if parameter not in (PARAM_IMPORT, PARAM_EXPORT):
        raise ValueError(f"payment derivative needs a price parameter, got {parameter}")
    rep = dg_dparam(scenario, c_g, g_max, parameter, tau)
    dg = rep.value if rep.value is not None else 0.0
    res = solve_capacity(scenario, c_g, g_max, xtol_rel=_TIGHT_XTOL)
    g = res.g_star

    u_tau = scenario.utilities[tau]
    p_tau = scenario.schedule.price(tau)
    th_tau = thresholds(u_tau, p_tau)
    q_tau = expected_period_quantities(u_tau, p_tau, scenario.dists[tau], g)
    p_imp, _, p_exp = regime_probabilities(scenario.dists[tau], g, th_tau)
    if parameter == PARAM_IMPORT:
        direct = q_tau.imports + p_tau.import_price * p_imp / u_tau.curvature()
    else:
        direct = -q_tau.exports + p_tau.export_price * p_exp / u_tau.curvature()

    price_mass = 0.0
    for t in scenario.generating_periods():
        p_t = scenario.schedule.price(t)
        price_mass += p_t.import_price * _regime_mass(scenario, t, g, "import")
        price_mass += p_t.export_price * _regime_mass(scenario, t, g, "export")
    return EffectDecomposition(direct=direct, pv=-price_mass * dg)


# ---------------------------------------------------------------------------
# Comparative-statics sign report
# ---------------------------------------------------------------------------

REGIMES = ("import", "net_zero", "export")

#: (variable, parameter) -> expected signs per (import, net_zero, export)
#: realization of the designated period.  "X" marks indeterminate cells,
#: reported but never asserted.
EXPECTED_SIGNS = {
    ("d_tau", PARAM_COST): ("0", "-", "-"),
    ("d_tau", PARAM_IMPORT): ("-", "+", "0"),
    ("d_tau", PARAM_EXPORT): ("0", "+", "-"),
    ("net_demand_tau", PARAM_COST): ("+", "0", "+"),
    ("net_demand_tau", PARAM_IMPORT): ("-", "0", "-"),
    ("net_demand_tau", PARAM_EXPORT): ("-", "0", "-"),
    ("d_t", PARAM_IMPORT): ("0", "+", "0"),
    ("d_t", PARAM_EXPORT): ("0", "+", "0"),
    ("net_demand_t", PARAM_IMPORT): ("-", "0", "-"),
    ("net_demand_t", PARAM_EXPORT): ("-", "0", "-"),
    ("payment", PARAM_COST): ("+", "0", "+"),
    ("payment", PARAM_IMPORT): ("X", "0", "-"),
    ("payment", PARAM_EXPORT): ("-", "0", "-"),
    ("surplus", PARAM_COST): ("-", "-", "-"),
    ("surplus", PARAM_IMPORT): ("X", "+", "+"),
    ("surplus", PARAM_EXPORT): ("+", "+", "+"),
}

_TAU_VARIABLES = ("d_tau", "net_demand_tau", "payment", "surplus")
_OTHER_VARIABLES = ("d_t", "net_demand_t")


@dataclass(frozen=True)
class SignCell:
    variable: str
    parameter: str
    regime: str
    expected: str
    empirical: str | None
    status: str  # ok | indeterminate | infeasible | non_local
    fd: float | None = None


def _regime_point(scenario, t, g, regime):
    """A psi value whose realization lies strictly inside ``regime``, or None."""
    th = thresholds(scenario.utilities[t], scenario.schedule.price(t))
    support = scenario.dists[t].support_max
    if g <= 0:
        bounds = {"import": (0.0, support)} if th.d_plus > 0 else {}
    else:
        bounds = {
            "import": (0.0, th.d_plus / g),
            "net_zero": (th.d_plus / g, th.d_minus / g),
            "export": (th.d_minus / g, support),
        }
    if regime not in bounds:
        return None
    lo, hi = bounds[regime]
    lo, hi = max(lo, 0.0), min(hi, support)
    if hi - lo <= 1e-12 * max(1.0, support):
        return None
    return 0.5 * (lo + hi)


def _realized(scenario, g, t, psi0):
    disp = optimal_dispatch(
        scenario.utilities[t], scenario.schedule.price(t), g, psi0
    )
    return {
        "d": disp.consumption,
        "net": disp.imports - disp.exports,
        "pay": disp.period_payment,
        "surp": disp.period_utility - disp.period_payment,
        "regime": disp.regime.value,
    }


_QUANTITY_KEY = {
    "d_tau": "d", "d_t": "d",
    "net_demand_tau": "net", "net_demand_t": "net",
    "payment": "pay", "surplus": "surp",
}


def sign_table(
    scenario: Scenario,
    c_g: float,
    g_max: float,
    tau: int | None = None,
    other: int | None = None,
    h_price: float = 1e-4,
    h_cost: float = 1e-3,
    zero_tol: float = 1e-3,
) -> list[SignCell]:
    """Empirical comparative-statics signs via central finite differences.

    Quantities are realization-level: for each regime a capacity-factor
    point strictly inside that regime of the designated period is fixed,
    and the realized dispatch quantity is differentiated with respect to
    each parameter with the capacity re-optimized at every evaluation.
    Cells where the regime or solution classification switches inside
    the stencil are flagged non-local and excluded.
    """
    gen = scenario.generating_periods()
    if not gen:
        raise ValueError("sign table needs at least one generating period")
    if tau is None:
        tau = gen[0]
    if other is None:
        other = next((t for t in gen if t != tau), None)

    base = solve_capacity(scenario, c_g, g_max, xtol_rel=_TIGHT_XTOL)
    g0 = base.g_star

    # One perturbed pair of (scenario, cost, solved g) per parameter.
    evals: dict[str, tuple | None] = {}
    for parameter in (PARAM_COST, PARAM_IMPORT, PARAM_EXPORT):
        try:
            if parameter == PARAM_COST:
                pair = [(scenario, c_g - h_cost), (scenario, c_g + h_cost)]
            elif parameter == PARAM_IMPORT:
                pair = [
                    (scenario.perturbed(-h_price, 0.0, scope=tau), c_g),
                    (scenario.perturbed(+h_price, 0.0, scope=tau), c_g),
                ]
            else:
                pair = [
                    (scenario.perturbed(0.0, -h_price, scope=tau), c_g),
                    (scenario.perturbed(0.0, +h_price, scope=tau), c_g),
                ]
            evals[parameter] = [
                (sc, solve_capacity(sc, cost, g_max, xtol_rel=_TIGHT_XTOL))
                for sc, cost in pair
            ]
        except TariffError:
            evals[parameter] = None

    cells = []
    for (variable, parameter), expected_by_regime in EXPECTED_SIGNS.items():
        period = tau if variable in _TAU_VARIABLES else other
        key = _QUANTITY_KEY[variable]
        for regime, expected in zip(REGIMES, expected_by_regime):
            status = "indeterminate" if expected == "X" else "ok"
            if period is None or evals[parameter] is None:
                cells.append(SignCell(variable, parameter, regime, expected,
                                      None, "infeasible"))
                continue
            psi0 = _regime_point(scenario, period, g0, regime)
            if psi0 is None:
                cells.append(SignCell(variable, parameter, regime, expected,
                                      None, "infeasible"))
                continue
            (sc_m, res_m), (sc_p, res_p) = evals[parameter]
            qm = _realized(sc_m, res_m.g_star, period, psi0)
            qp = _realized(sc_p, res_p.g_star, period, psi0)
            local = (
                res_m.classification == base.classification
                and res_p.classification == base.classification
                and qm["regime"] == regime
                and qp["regime"] == regime
            )
            if not local:
                cells.append(SignCell(variable, parameter, regime, expected,
                                      None, "non_local"))
                continue
            h = h_cost if parameter == PARAM_COST else h_price
            fd = (qp[key] - qm[key]) / (2.0 * h)
            threshold = zero_tol * (1.0 + abs(qm[key]) + abs(qp[key]))
            if abs(fd) <= threshold:
                empirical = "0"
            else:
                empirical = "+" if fd > 0 else "-"
            cells.append(SignCell(variable, parameter, regime, expected,
                                  empirical, status, fd))
    return cells
