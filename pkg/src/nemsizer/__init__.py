"""Prosumer PV sizing and tariff analysis under net energy metering."""

from .tariff import (
    EQUAL_PRICE_EPS,
    AssignmentRule,
    PeriodPrice,
    TariffError,
    TariffSchedule,
    ValidatedSchedule,
    assign_period,
    load_tariff_toml,
    perturb,
    validate_schedule,
)
from .utility import QuadraticUtility, Thresholds, calibrate, inverse_demand, thresholds, utility
from .stochastic import (
    ClippedNormal,
    NumericalError,
    PiecewiseIntegrand,
    PointMass,
    expect,
    mc_expect,
    regime_probabilities,
)
from .dispatch import (
    DispatchResult,
    ExpectedQuantities,
    Regime,
    expected_period_quantities,
    optimal_dispatch,
    payment,
    surplus,
)
from .sizing import (
    Classification,
    InvestmentResult,
    flat_bound,
    marginal_value,
    marginal_value_curve,
    solve_capacity,
)
from .sensitivity import (
    DerivativeReport,
    EffectDecomposition,
    SignCell,
    dg_dparam,
    net_demand_derivative,
    payment_derivative,
    sign_table,
)
from .scenario import (
    HourlyRecord,
    PeriodAggregate,
    Scenario,
    SweepGrid,
    SweepPoint,
    aggregate,
    amortized_cost,
    build_scenario,
    run_sweep,
    synth_generate,
)

__version__ = "0.1.0"
