"""Scenario assembly: data ingestion, calibration, synthesis, and sweeps.

A scenario bundles a validated tariff schedule with one calibrated
utility and one capacity-factor distribution per settlement period, plus
the capacity cost and cap.  Hourly demand/generation profiles are
aggregated into (month x peak/off-peak) buckets; the bucket's demand sum
anchors the utility calibration and the bucket's mean capacity factor
parameterizes a clipped normal.

Per-period generation is measured in bucket energy: the capacity-factor
variable is scaled by the bucket's hour count (``psi_max`` = hours), so
``psi * g`` is the period's kWh from g kW of PV.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
from joblib import Parallel, delayed

from . import sizing
from .dispatch import expected_period_quantities
from .stochastic import CapacityFactorDist, ClippedNormal, PointMass
from .tariff import TariffError, ValidatedSchedule, perturb
from .utility import QuadraticUtility, calibrate, thresholds

#: Slope used for degenerate (zero-demand) periods; forces thresholds ~ 0.
_DEGENERATE_B = 1e9

#: Default month-specific capacity-factor standard deviations.  Placeholder
#: scale only; real studies should supply measured values per period.
DEFAULT_SIGMA_BY_MONTH = {
    1: 0.20, 2: 0.18, 3: 0.16, 4: 0.12, 5: 0.09, 6: 0.05,
    7: 0.05, 8: 0.05, 9: 0.09, 10: 0.12, 11: 0.16, 12: 0.20,
}

_DAYS_IN_MONTH = [31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31]


@dataclass(frozen=True)
class HourlyRecord:
    month: int
    day: int
    hour: int
    demand: float
    capacity_factor: float

    def __post_init__(self):
        if not 0.0 <= self.capacity_factor <= 1.0:
            raise ValueError(
                f"capacity factor outside [0, 1]: {self.capacity_factor}"
            )
        if self.demand < 0:
            raise ValueError(f"negative demand: {self.demand}")


@dataclass(frozen=True)
class PeriodAggregate:
    """Per-period calibration inputs derived from hourly data."""

    d0: float          # bucket demand sum, kWh
    mean_cf: float     # mean capacity factor over the bucket's hours
    sigma: float | None  # capacity-factor std; month-specific input
    psi_max: float     # generation scale bound (bucket hours for energy units)


@dataclass(frozen=True)
class Scenario:
    """Validated schedule + per-period utilities and distributions."""

    schedule: ValidatedSchedule
    utilities: tuple[QuadraticUtility, ...]
    dists: tuple[CapacityFactorDist, ...]
    c_g: float
    g_max: float
    degenerate: frozenset[int] = frozenset()

    def __post_init__(self):
        n = self.schedule.n_periods
        if len(self.utilities) != n or len(self.dists) != n:
            raise ValueError("one utility and one distribution per period")
        if self.c_g < 0 or self.g_max <= 0:
            raise ValueError("require c_g >= 0 and g_max > 0")

    def generating_periods(self) -> list[int]:
        return [t for t, d in enumerate(self.dists) if d.support_max > 0]

    def with_schedule(self, schedule: ValidatedSchedule) -> "Scenario":
        return replace(self, schedule=schedule)

    def perturbed(
        self, dpi_plus: float, dpi_minus: float, scope: int | None = None
    ) -> "Scenario":
        return self.with_schedule(
            perturb(self.schedule, dpi_plus, dpi_minus, scope)
        )


def aggregate(
    records: Iterable[HourlyRecord], schedule: ValidatedSchedule
) -> dict[int, PeriodAggregate]:
    """Bucket hourly records into per-period calibration aggregates.

    The anchor demand is the bucket SUM of hourly demand (the settlement
    period is the decision unit); the capacity factor is the bucket
    mean.  The sigma slot is left unset and must be supplied per period.
    """
    sums: dict[int, float] = {}
    cf_sums: dict[int, float] = {}
    counts: dict[int, int] = {}
    for rec in records:
        t = schedule.assign(rec.month, rec.hour)
        sums[t] = sums.get(t, 0.0) + rec.demand
        cf_sums[t] = cf_sums.get(t, 0.0) + rec.capacity_factor
        counts[t] = counts.get(t, 0) + 1
    out = {}
    for t in range(schedule.n_periods):
        if counts.get(t, 0) == 0:
            raise ValueError(f"no hourly records fall in period {t}")
        out[t] = PeriodAggregate(
            d0=sums[t],
            mean_cf=cf_sums[t] / counts[t],
            sigma=None,
            psi_max=float(counts[t]),
        )
    return out


def amortized_cost(
    capex: float, annual_rate: float, n_months: int, credit_fraction: float
) -> float:
    """Yearly amortized cost per kW from a monthly loan annuity.

    credit_fraction * 12 * capex * r / (1 - (1+r)^-n), r = annual/12.
    """
    if annual_rate <= 0 or n_months <= 0:
        raise ValueError("require annual_rate > 0 and n_months > 0")
    r = annual_rate / 12.0
    return credit_fraction * 12.0 * capex * r / (1.0 - (1.0 + r) ** (-n_months))


@dataclass(frozen=True)
class SynthParams:
    """Knobs for the synthetic Massachusetts-shaped year."""

    base_demand: float = 0.9          # kWh, flat floor
    seasonal_amplitude: float = 0.35  # winter-peaking annual swing
    evening_bump: float = 0.9         # extra evening demand, kWh at peak
    noise_sigma: float = 0.15         # lognormal-ish jitter on demand
    cf_peak_summer: float = 0.75      # clear-sky noon capacity factor, June
    cf_peak_winter: float = 0.45      # clear-sky noon capacity factor, December
    half_day_summer: float = 7.0      # hours of generation either side of noon
    half_day_winter: float = 4.5


def synth_generate(
    seed: int, params: SynthParams = SynthParams()
) -> list[HourlyRecord]:
    """Deterministic synthetic hourly demand and PV capacity factors.

    Demand is a base plus a winter-peaking seasonal sinusoid, an evening
    bump, and seeded noise; the capacity factor is a clear-sky diurnal
    bell scaled seasonally, zero outside the daylight window.
    """
    rng = np.random.Generator(np.random.Philox(seed))
    records = []
    for m in range(1, 13):
        # 1 at mid-June, 0 at mid-December
        season = 0.5 * (1.0 + math.cos(2.0 * math.pi * (m - 6.5) / 12.0))
        half_day = (
            params.half_day_winter
            + (params.half_day_summer - params.half_day_winter) * season
        )
        cf_peak = (
            params.cf_peak_winter
            + (params.cf_peak_summer - params.cf_peak_winter) * season
        )
        for day in range(1, _DAYS_IN_MONTH[m - 1] + 1):
            noise = rng.normal(0.0, params.noise_sigma, size=24)
            for hour in range(24):
                seasonal = params.seasonal_amplitude * (1.0 - season)
                evening = params.evening_bump * math.exp(-0.5 * ((hour - 19) / 1.8) ** 2)
                demand = max(
                    0.0,
                    params.base_demand + seasonal + evening + noise[hour],
                )
                offset = hour + 0.5 - 12.0  # mid-hour vs solar noon
                if abs(offset) < half_day:
                    cf = cf_peak * math.cos(0.5 * math.pi * offset / half_day) ** 2
                else:
                    cf = 0.0
                records.append(
                    HourlyRecord(m, day, hour, demand, min(1.0, max(0.0, cf)))
                )
    return records


def build_scenario(
    aggregates: Mapping[int, PeriodAggregate],
    schedule: ValidatedSchedule,
    sigma_per_period: Mapping[int, float] | None = None,
    elasticity: float = -0.25,
    anchor_price: float = 0.35,
    c_g: float | None = None,
    g_max: float = 13.0,
) -> Scenario:
    """Calibrate utilities and distributions from per-period aggregates.

    ``sigma_per_period`` overrides (or supplies, when the aggregate left
    it unset) the capacity-factor standard deviation.  The capacity cost
    defaults to the amortized case-study value.
    """
    if c_g is None:
        c_g = amortized_cost(3750.0, 0.055, 120, 0.7)
    utilities = []
    dists = []
    degenerate = set()
    for t in range(schedule.n_periods):
        agg = aggregates[t]
        if agg.d0 > 0:
            utilities.append(calibrate(agg.d0, anchor_price, elasticity))
        else:
            degenerate.add(t)
            a = anchor_price * (1.0 - 1.0 / elasticity)
            utilities.append(QuadraticUtility(a=a, b=_DEGENERATE_B))
        if agg.mean_cf > 0:
            sigma = agg.sigma
            if sigma_per_period is not None and t in sigma_per_period:
                sigma = sigma_per_period[t]
            if sigma is None:
                raise ValueError(
                    f"period {t}: capacity-factor sigma is a required input"
                )
            dists.append(
                ClippedNormal(
                    mu=agg.mean_cf * agg.psi_max,
                    sigma=sigma * agg.psi_max,
                    psi_max=agg.psi_max,
                )
            )
        else:
            dists.append(PointMass(0.0))
    return Scenario(
        schedule=schedule,
        utilities=tuple(utilities),
        dists=tuple(dists),
        c_g=c_g,
        g_max=g_max,
        degenerate=frozenset(degenerate),
    )


def expected_totals(scenario: Scenario, g: float) -> tuple[float, float]:
    """(total expected net demand, total expected payment) at capacity g."""
    net = 0.0
    pay = scenario.schedule.fixed_charge
    for t in range(scenario.schedule.n_periods):
        q = expected_period_quantities(
            scenario.utilities[t],
            scenario.schedule.price(t),
            scenario.dists[t],
            g,
        )
        net += q.imports - q.exports
        pay += q.payment
    return net, pay


@dataclass(frozen=True)
class SweepPoint:
    dpi_plus: float
    dpi_minus: float
    g_star: float
    net_demand_endog: float
    net_demand_fixed: float
    payment_endog: float
    payment_fixed: float
    valid: bool


@dataclass(frozen=True)
class SweepGrid:
    points: tuple[SweepPoint, ...]
    g_fixed: float
    grid_n: int


def _sweep_cell(scenario, dp, dm, g_fixed):
    try:
        pert = scenario.perturbed(dp, dm)
    except TariffError:
        return SweepPoint(dp, dm, math.nan, math.nan, math.nan, math.nan,
                          math.nan, False)
    res = sizing.solve_capacity(pert, scenario.c_g, scenario.g_max)
    net_e, pay_e = expected_totals(pert, res.g_star)
    net_f, pay_f = expected_totals(pert, g_fixed)
    return SweepPoint(dp, dm, res.g_star, net_e, net_f, pay_e, pay_f, True)


def run_sweep(
    scenario: Scenario,
    dpi_plus_range: tuple[float, float] = (0.0, 0.15),
    dpi_minus_range: tuple[float, float] = (-0.15, 0.0),
    grid_n: int = 16,
    g_fixed: float | None = None,
    n_jobs: int = 1,
) -> SweepGrid:
    """Tariff perturbation sweep with endogenous vs fixed-capacity columns.

    The fixed capacity defaults to the optimum of the unperturbed
    scenario.  Grid cells whose perturbation inverts the price ordering
    are marked invalid.  Output order follows the grid index regardless
    of evaluation order.
    """
    if grid_n < 2:
        raise ValueError(f"grid_n must be >= 2, got {grid_n}")
    if g_fixed is None:
        g_fixed = sizing.solve_capacity(scenario, scenario.c_g, scenario.g_max).g_star
    dps = np.linspace(*dpi_plus_range, grid_n)
    dms = np.linspace(*dpi_minus_range, grid_n)
    cells = [(float(dp), float(dm)) for dp in dps for dm in dms]
    if n_jobs == 1:
        points = [_sweep_cell(scenario, dp, dm, g_fixed) for dp, dm in cells]
    else:
        points = Parallel(n_jobs=n_jobs)(
            delayed(_sweep_cell)(scenario, dp, dm, g_fixed) for dp, dm in cells
        )
    return SweepGrid(points=tuple(points), g_fixed=g_fixed, grid_n=grid_n)


# ---------------------------------------------------------------------------
# CSV interfaces
# ---------------------------------------------------------------------------

def _full(x: float) -> str:
    """Full-precision float formatting for round-trippable files."""
    return format(x, ".17g")


def fmt9(x: float) -> str:
    """Report formatting: 9 significant digits."""
    return format(x, ".9g")


def _writable(path_or_file):
    """Return (file, should_close) for a path or an already-open stream."""
    if isinstance(path_or_file, (str, Path)):
        return Path(path_or_file).open("w", newline=""), True
    return path_or_file, False


def write_hourly_csv(path_or_file, records: Iterable[HourlyRecord]) -> None:
    fh, close = _writable(path_or_file)
    try:
        w = csv.writer(fh)
        w.writerow(["month", "day", "hour", "demand_kwh", "capacity_factor"])
        for r in records:
            w.writerow([r.month, r.day, r.hour, _full(r.demand),
                        _full(r.capacity_factor)])
    finally:
        if close:
            fh.close()


def read_hourly_csv(path: str | Path) -> list[HourlyRecord]:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        return [
            HourlyRecord(
                int(row["month"]), int(row["day"]), int(row["hour"]),
                float(row["demand_kwh"]), float(row["capacity_factor"]),
            )
            for row in reader
        ]


def write_aggregates_csv(
    path: str | Path, aggregates: Mapping[int, PeriodAggregate]
) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["period_id", "d0_kwh", "mean_cf", "sigma", "psi_max"])
        for t in sorted(aggregates):
            a = aggregates[t]
            w.writerow([
                t, _full(a.d0), _full(a.mean_cf),
                "" if a.sigma is None else _full(a.sigma), _full(a.psi_max),
            ])


def read_aggregates_csv(path: str | Path) -> dict[int, PeriodAggregate]:
    out = {}
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            t = int(row["period_id"])
            sigma = row.get("sigma", "")
            out[t] = PeriodAggregate(
                d0=float(row["d0_kwh"]),
                mean_cf=float(row["mean_cf"]),
                sigma=float(sigma) if sigma not in ("", None) else None,
                psi_max=float(row["psi_max"]),
            )
    return out


def write_calibration_csv(path_or_file, scenario: Scenario,
                          aggregates: Mapping[int, PeriodAggregate]) -> None:
    """Persist calibrated parameters: period_id, a, b, mean_cf, cf_sigma, cf_max."""
    fh, close = _writable(path_or_file)
    try:
        w = csv.writer(fh)
        w.writerow(["period_id", "a", "b", "mean_cf", "cf_sigma", "cf_max"])
        for t in range(scenario.schedule.n_periods):
            u = scenario.utilities[t]
            a = aggregates[t]
            w.writerow([
                t, fmt9(u.a), fmt9(u.b), fmt9(a.mean_cf),
                "" if a.sigma is None else fmt9(a.sigma), fmt9(a.psi_max),
            ])
    finally:
        if close:
            fh.close()


def write_sweep_csv(path_or_file, grid: SweepGrid) -> None:
    fh, close = _writable(path_or_file)
    try:
        w = csv.writer(fh)
        w.writerow([
            "dpi_plus", "dpi_minus", "g_star", "net_demand_endog",
            "net_demand_fixed", "payment_endog", "payment_fixed", "valid_flag",
        ])
        for p in grid.points:
            w.writerow([
                fmt9(p.dpi_plus), fmt9(p.dpi_minus), fmt9(p.g_star),
                fmt9(p.net_demand_endog), fmt9(p.net_demand_fixed),
                fmt9(p.payment_endog), fmt9(p.payment_fixed), int(p.valid),
            ])
    finally:
        if close:
            fh.close()
