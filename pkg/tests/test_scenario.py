import io
import math

import numpy as np
import pytest

from conftest import interior_scenario, random_scenario
from nemsizer.dispatch import expected_period_quantities
from nemsizer.scenario import (
    HourlyRecord,
    PeriodAggregate,
    aggregate,
    amortized_cost,
    build_scenario,
    expected_totals,
    read_aggregates_csv,
    read_hourly_csv,
    run_sweep,
    synth_generate,
    write_aggregates_csv,
    write_hourly_csv,
    write_sweep_csv,
)
from nemsizer.stochastic import ClippedNormal, PointMass
from nemsizer.tariff import PeriodPrice, ValidatedSchedule


def test_amortized_cost_reference_values():
    assert amortized_cost(3750.0, 0.055, 120, 0.7) == pytest.approx(341.858, abs=0.01)
    assert amortized_cost(375.0, 0.055, 120, 0.7) == pytest.approx(34.186, abs=0.01)
    with pytest.raises(ValueError):
        amortized_cost(3750.0, 0.0, 120, 0.7)


def test_synth_generate_deterministic():
    a = synth_generate(42)
    b = synth_generate(42)
    c = synth_generate(43)
    assert a == b
    assert a != c
    assert len(a) == 8760
    assert all(0.0 <= r.capacity_factor <= 1.0 and r.demand >= 0 for r in a)
    # PV is dark at midnight and alive at noon in June
    noon = [r for r in a if r.month == 6 and r.hour == 12]
    night = [r for r in a if r.hour == 0]
    assert min(r.capacity_factor for r in noon) > 0.3
    assert all(r.capacity_factor == 0.0 for r in night)


def test_hourly_record_validation():
    with pytest.raises(ValueError):
        HourlyRecord(1, 1, 0, demand=1.0, capacity_factor=1.5)
    with pytest.raises(ValueError):
        HourlyRecord(1, 1, 0, demand=-1.0, capacity_factor=0.5)


def flat_monthly_schedule():
    from nemsizer.tariff import AssignmentRule, TariffSchedule, validate_schedule

    return validate_schedule(TariffSchedule(
        name="flat",
        rules=(AssignmentRule(frozenset(range(1, 13)), 0, 24, False, 0.35, 0.16),),
    ))


def test_aggregate_buckets_by_period():
    sched = flat_monthly_schedule()
    records = synth_generate(7)
    aggs = aggregate(records, sched)
    assert set(aggs) == set(range(12))
    jan = aggs[sched.assign(1, 0)]
    assert jan.psi_max == 31 * 24
    manual = sum(r.demand for r in records if r.month == 1)
    assert jan.d0 == pytest.approx(manual)
    manual_cf = np.mean([r.capacity_factor for r in records if r.month == 1])
    assert jan.mean_cf == pytest.approx(manual_cf)
    assert jan.sigma is None


def test_aggregate_empty_bucket_rejected():
    sched = flat_monthly_schedule()
    records = [r for r in synth_generate(7) if r.month != 3]
    with pytest.raises(ValueError, match="no hourly records"):
        aggregate(records, sched)


def test_build_scenario_calibration_and_scaling():
    sched = flat_monthly_schedule()
    aggs = aggregate(synth_generate(7), sched)
    scn = build_scenario(aggs, sched, sigma_per_period={t: 0.1 for t in aggs})
    t = sched.assign(6, 0)
    agg = aggs[t]
    # demand anchor reproduced at the anchor price
    u = scn.utilities[t]
    assert u.inverse_marginal(0.35) == pytest.approx(agg.d0)
    d = scn.dists[t]
    assert isinstance(d, ClippedNormal)
    assert d.psi_max == agg.psi_max
    assert d.mu == pytest.approx(agg.mean_cf * agg.psi_max)
    assert scn.c_g == pytest.approx(341.858, abs=0.01)


def test_build_scenario_requires_sigma():
    sched = flat_monthly_schedule()
    aggs = aggregate(synth_generate(7), sched)
    with pytest.raises(ValueError, match="sigma"):
        build_scenario(aggs, sched)


def test_build_scenario_degenerate_period():
    sched = ValidatedSchedule.from_period_prices(
        [PeriodPrice(0.35, 0.16), PeriodPrice(0.35, 0.16)]
    )
    aggs = {
        0: PeriodAggregate(d0=100.0, mean_cf=0.3, sigma=0.1, psi_max=100.0),
        1: PeriodAggregate(d0=0.0, mean_cf=0.0, sigma=None, psi_max=100.0),
    }
    scn = build_scenario(aggs, sched)
    assert scn.degenerate == frozenset({1})
    assert isinstance(scn.dists[1], PointMass)
    assert scn.generating_periods() == [0]
    # degenerate demand: essentially zero consumption at the anchor price
    assert scn.utilities[1].inverse_marginal(0.35) < 1e-6


def test_expected_totals_consistency(rng):
    scn = random_scenario(rng, n_periods=3, dist="mixed")
    net, pay = expected_totals(scn, 1.5)
    n2 = p2 = 0.0
    for t in range(3):
        q = expected_period_quantities(
            scn.utilities[t], scn.schedule.price(t), scn.dists[t], 1.5
        )
        n2 += q.imports - q.exports
        p2 += q.payment
    assert net == pytest.approx(n2)
    assert pay == pytest.approx(p2)


def test_hourly_csv_roundtrip(tmp_path):
    records = synth_generate(5)[:100]
    path = tmp_path / "hourly.csv"
    write_hourly_csv(path, records)
    assert read_hourly_csv(path) == records


def test_aggregates_csv_roundtrip(tmp_path):
    aggs = {
        0: PeriodAggregate(d0=123.456, mean_cf=0.31, sigma=0.07, psi_max=744.0),
        1: PeriodAggregate(d0=98.7, mean_cf=0.25, sigma=None, psi_max=672.0),
    }
    path = tmp_path / "aggs.csv"
    write_aggregates_csv(path, aggs)
    back = read_aggregates_csv(path)
    assert back == aggs


def test_run_sweep_shape_and_determinism(rng):
    scn = interior_scenario(rng, n_periods=2, dist="point")
    grid = run_sweep(scn, dpi_plus_range=(0.0, 0.05),
                     dpi_minus_range=(-0.05, 0.0), grid_n=3)
    assert len(grid.points) == 9
    par = run_sweep(scn, dpi_plus_range=(0.0, 0.05),
                    dpi_minus_range=(-0.05, 0.0), grid_n=3, n_jobs=2)
    assert par.points == grid.points
    base = next(p for p in grid.points if p.dpi_plus == 0 and p.dpi_minus == 0)
    assert base.valid
    # at the unperturbed corner the fixed capacity equals the optimum
    assert base.net_demand_endog == pytest.approx(base.net_demand_fixed)
    assert base.payment_endog == pytest.approx(base.payment_fixed)


def test_run_sweep_flags_invalid_cells(rng):
    scn = interior_scenario(rng, n_periods=1, dist="point")
    p = scn.schedule.price(0)
    # dropping the import price below the export price inverts the
    # ordering and must invalidate the cell
    spread = p.import_price - p.export_price
    grid = run_sweep(scn, dpi_plus_range=(-(spread + 0.1), 0.0),
                     dpi_minus_range=(0.0, 0.0), grid_n=2)
    bad = [p for p in grid.points if not p.valid]
    good = [p for p in grid.points if p.valid]
    assert bad and good
    assert all(math.isnan(p.g_star) for p in bad)


def test_sweep_csv_has_all_rows(rng):
    scn = interior_scenario(rng, n_periods=1, dist="point")
    grid = run_sweep(scn, dpi_plus_range=(0.0, 0.02),
                     dpi_minus_range=(-0.02, 0.0), grid_n=2)
    buf = io.StringIO()
    write_sweep_csv(buf, grid)
    lines = buf.getvalue().strip().splitlines()
    assert lines[0].startswith("dpi_plus,dpi_minus,g_star")
    assert len(lines) == 1 + 4
