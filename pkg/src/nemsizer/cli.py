"""Command-line front end: scenario configs in, plot-ready CSV/JSON out."""

from __future__ import annotations

import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import click

from . import sensitivity as sens
from . import sizing
from .dispatch import expected_period_quantities
from .scenario import (
    DEFAULT_SIGMA_BY_MONTH,
    PeriodAggregate,
    Scenario,
    aggregate,
    build_scenario,
    fmt9,
    read_aggregates_csv,
    read_hourly_csv,
    run_sweep,
    synth_generate,
    write_calibration_csv,
    write_hourly_csv,
    write_sweep_csv,
)
from .stochastic import NumericalError, regime_probabilities
from .tariff import TariffError, parse_tariff_table, validate_schedule
from .utility import thresholds

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2

DEFAULT_SEED = 2018


class ConfigError(ValueError):
    """Malformed or inconsistent scenario configuration."""


@dataclass
class LoadedConfig:
    scenario: Scenario
    aggregates: dict[int, PeriodAggregate]
    name: str
    seed: int


def load_config(path: str | Path, seed_override: int | None = None) -> LoadedConfig:
    """Parse a tariff+scenario TOML file into a ready-to-run scenario.

    The hourly source is, in order of precedence: an aggregates CSV, an
    hourly CSV, or the seeded synthetic generator.  Relative paths
    resolve against the config file's directory.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    with path.open("rb") as fh:
        try:
            doc = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc

    schedule = validate_schedule(parse_tariff_table(doc, source=str(path)))
    sc = doc.get("scenario", {})

    def _num(key, default):
        v = sc.get(key, default)
        if not isinstance(v, (int, float)):
            raise ConfigError(f"{path}: scenario.{key} must be a number")
        return float(v)

    elasticity = _num("elasticity", -0.25)
    anchor_price = _num("anchor_price", 0.35)
    c_g = _num("pv_cost", 341.86)
    g_max = _num("g_max", 13.0)
    seed = seed_override
    if seed is None:
        env = os.environ.get("NEM_SIZER_SEED")
        seed = int(env) if env else int(sc.get("synth_seed", DEFAULT_SEED))

    sigma_by_month = dict(DEFAULT_SIGMA_BY_MONTH)
    for k, v in sc.get("sigma_by_month", {}).items():
        sigma_by_month[int(k)] = float(v)

    if "aggregates_csv" in sc:
        aggs = read_aggregates_csv(path.parent / sc["aggregates_csv"])
        if set(aggs) != set(range(schedule.n_periods)):
            raise ConfigError(
                f"{path}: aggregates CSV periods do not match the tariff's "
                f"{schedule.n_periods} settlement periods"
            )
    else:
        if "hourly_csv" in sc:
            records = read_hourly_csv(path.parent / sc["hourly_csv"])
        else:
            records = synth_generate(seed)
        aggs = aggregate(records, schedule)

    sigma_per_period = {}
    if schedule.period_keys is not None:
        for t, (month, _peak) in enumerate(schedule.period_keys):
            if aggs[t].sigma is None:
                sigma_per_period[t] = sigma_by_month[month]
    scenario = build_scenario(
        aggs, schedule,
        sigma_per_period=sigma_per_period or None,
        elasticity=elasticity, anchor_price=anchor_price,
        c_g=c_g, g_max=g_max,
    )
    return LoadedConfig(scenario=scenario, aggregates=aggs,
                        name=schedule.name, seed=seed)


def _emit_table(header, rows, out, fmt):
    if fmt == "json":
        payload = [dict(zip(header, row)) for row in rows]
        out.write(json.dumps(payload, indent=2))
        out.write("\n")
    else:
        out.write(",".join(header) + "\n")
        for row in rows:
            out.write(",".join(str(c) for c in row) + "\n")


def _emit_json(obj, out):
    out.write(json.dumps(obj, indent=2, sort_keys=True))
    out.write("\n")


def _round9(x):
    if x is None or (isinstance(x, float) and not math.isfinite(x)):
        return None if x is None else str(x)
    return float(fmt9(x))


def _open_out(out_path):
    if out_path is None:
        return sys.stdout, False
    return open(out_path, "w"), True


config_opt = click.option("--config", "config_path", required=True,
                          type=click.Path(), help="Scenario TOML file.")
out_opt = click.option("--out", "out_path", default=None,
                       type=click.Path(), help="Output file (default stdout).")
seed_opt = click.option("--seed", type=int, default=None,
                        help="Override the synthetic-data seed.")
format_opt = click.option("--format", "fmt", default=None,
                          type=click.Choice(["csv", "json"]))


@click.group()
def main():
    """Prosumer PV sizing and tariff analysis under net energy metering."""


def _run(fn):
    """Execute a command body with the documented exit-code mapping."""
    try:
        fn()
    except (ConfigError, TariffError, ValueError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    except (NumericalError, ArithmeticError) as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(EXIT_NUMERICAL)
    sys.exit(EXIT_OK)


@main.command()
@config_opt
@out_opt
@seed_opt
@format_opt
def validate(config_path, out_path, seed, fmt):
    """Validate a config and list its settlement periods."""

    def body():
        cfg = load_config(config_path, seed)
        sched = cfg.scenario.schedule
        rows = []
        for t in range(sched.n_periods):
            p = sched.price(t)
            month, peak = sched.period_keys[t]
            rows.append([t, month, int(peak),
                         fmt9(p.import_price), fmt9(p.export_price)])
        out, close = _open_out(out_path)
        try:
            _emit_table(
                ["period_id", "month", "peak", "import_price", "export_price"],
                rows, out, fmt or "csv",
            )
        finally:
            if close:
                out.close()

    _run(body)


@main.command()
@config_opt
@out_opt
@seed_opt
def calibrate(config_path, out_path, seed):
    """Emit calibrated per-period utility and distribution parameters."""

    def body():
        cfg = load_config(config_path, seed)
        write_calibration_csv(out_path if out_path else sys.stdout,
                              cfg.scenario, cfg.aggregates)

    _run(body)


@main.command()
@config_opt
@out_opt
@seed_opt
@format_opt
@click.option("--capacity", type=float, default=None,
              help="PV capacity in kW (default: the optimum).")
def dispatch(config_path, out_path, seed, fmt, capacity):
    """Expected per-period dispatch at a given (or optimal) capacity."""

    def body():
        cfg = load_config(config_path, seed)
        scn = cfg.scenario
        g = capacity
        if g is None:
            g = sizing.solve_capacity(scn, scn.c_g, scn.g_max).g_star
        rows = []
        for t in range(scn.schedule.n_periods):
            u = scn.utilities[t]
            p = scn.schedule.price(t)
            th = thresholds(u, p)
            probs = regime_probabilities(scn.dists[t], g, th)
            q = expected_period_quantities(u, p, scn.dists[t], g)
            rows.append([
                t, fmt9(probs[0]), fmt9(probs[1]), fmt9(probs[2]),
                fmt9(q.consumption), fmt9(q.imports), fmt9(q.exports),
                fmt9(q.payment),
            ])
        out, close = _open_out(out_path)
        try:
            _emit_table(
                ["period_id", "p_import", "p_netzero", "p_export",
                 "e_consumption", "e_imports", "e_exports", "e_payment"],
                rows, out, fmt or "csv",
            )
        finally:
            if close:
                out.close()

    _run(body)


@main.command()
@config_opt
@out_opt
@seed_opt
@click.option("--pv-cost", type=float, default=None,
              help="Override the config's amortized capacity cost ($/kW/yr).")
@click.option("--gmax", type=float, default=None,
              help="Override the config's capacity bound (kW).")
def size(config_path, out_path, seed, pv_cost, gmax):
    """Solve the optimal PV capacity; emits JSON."""

    def body():
        cfg = load_config(config_path, seed)
        scn = cfg.scenario
        c_g = pv_cost if pv_cost is not None else scn.c_g
        g_max = gmax if gmax is not None else scn.g_max
        res = sizing.solve_capacity(scn, c_g, g_max)
        out, close = _open_out(out_path)
        try:
            _emit_json({
                "g_star": _round9(res.g_star),
                "classification": res.classification.value,
                "interval": [_round9(res.interval[0]), _round9(res.interval[1])],
                "F_at_gstar": _round9(res.F_at_gstar),
                "c_g": _round9(c_g),
                "flat_bound": _round9(min(sizing.flat_bound(scn), g_max)),
            }, out)
        finally:
            if close:
                out.close()

    _run(body)


@main.command()
@config_opt
@out_opt
@seed_opt
@format_opt
@click.option("--gmin", type=float, default=0.0)
@click.option("--gmax", type=float, default=None)
@click.option("--steps", type=int, default=200)
def curve(config_path, out_path, seed, fmt, gmin, gmax, steps):
    """Marginal-value curve F(g) on a capacity grid."""

    def body():
        cfg = load_config(config_path, seed)
        scn = cfg.scenario
        hi = gmax if gmax is not None else scn.g_max
        if steps < 2 or hi <= gmin or gmin < 0:
            raise ConfigError("need steps >= 2 and 0 <= gmin < gmax")
        grid = [gmin + (hi - gmin) * i / (steps - 1) for i in range(steps)]
        pts = sizing.marginal_value_curve(scn, grid)
        out, close = _open_out(out_path)
        try:
            _emit_table(["g", "F"],
                        [[fmt9(g), fmt9(f)] for g, f in pts],
                        out, fmt or "csv")
        finally:
            if close:
                out.close()

    _run(body)


@main.command()
@config_opt
@out_opt
@seed_opt
@click.option("--period", type=int, default=None,
              help="Shocked period (default: first generating period).")
def sensitivity(config_path, out_path, seed, period):
    """Analytic capacity sensitivities with finite-difference checks."""

    def body():
        cfg = load_config(config_path, seed)
        scn = cfg.scenario
        tau = period
        if tau is None:
            gen = scn.generating_periods()
            if not gen:
                raise ConfigError("no generating periods in scenario")
            tau = gen[0]
        payload = {}
        for name, param, per in (
            ("import_price", sens.PARAM_IMPORT, tau),
            ("export_price", sens.PARAM_EXPORT, tau),
            ("pv_cost", sens.PARAM_COST, None),
        ):
            rep = sens.dg_dparam(scn, scn.c_g, scn.g_max, param, per)
            payload[name] = {
                "case": rep.case,
                "period": per,
                "value": _round9(rep.value),
                "left": _round9(rep.left_value),
                "right": _round9(rep.right_value),
                "infinite": rep.infinite,
                "fd_check": _round9(
                    _fd_dg(scn, scn.c_g, scn.g_max, param, per)
                ),
            }
        out, close = _open_out(out_path)
        try:
            _emit_json(payload, out)
        finally:
            if close:
                out.close()

    _run(body)


def _fd_dg(scn, c_g, g_max, param, per, h_price=1e-4, h_cost=1e-3):
    """Central finite difference of g* for the sensitivity fd_check column."""
    try:
        if param == sens.PARAM_COST:
            lo = sizing.solve_capacity(scn, c_g - h_cost, g_max,
                                       xtol_rel=1e-12).g_star
            hi = sizing.solve_capacity(scn, c_g + h_cost, g_max,
                                       xtol_rel=1e-12).g_star
            return (hi - lo) / (2 * h_cost)
        dp = (h_price, 0.0) if param == sens.PARAM_IMPORT else (0.0, h_price)
        lo = sizing.solve_capacity(scn.perturbed(-dp[0], -dp[1], scope=per),
                                   c_g, g_max, xtol_rel=1e-12).g_star
        hi = sizing.solve_capacity(scn.perturbed(dp[0], dp[1], scope=per),
                                   c_g, g_max, xtol_rel=1e-12).g_star
        return (hi - lo) / (2 * h_price)
    except TariffError:
        return None


@main.command(name="sign-table")
@config_opt
@out_opt
@seed_opt
@format_opt
@click.option("--period", type=int, default=None)
def sign_table_cmd(config_path, out_path, seed, fmt, period):
    """Comparative-statics sign report (expected vs empirical)."""

    def body():
        cfg = load_config(config_path, seed)
        scn = cfg.scenario
        cells = sens.sign_table(scn, scn.c_g, scn.g_max, tau=period)
        rows = [
            [c.variable, c.parameter, c.regime, c.expected,
             c.empirical or "", c.status,
             "" if c.fd is None else fmt9(c.fd)]
            for c in cells
        ]
        out, close = _open_out(out_path)
        try:
            _emit_table(
                ["variable", "parameter", "regime", "expected", "empirical",
                 "status", "fd"],
                rows, out, fmt or "csv",
            )
        finally:
            if close:
                out.close()

    _run(body)


@main.command()
@config_opt
@out_opt
@seed_opt
@click.option("--grid", "grid_n", type=int, default=16)
@click.option("--dpi-plus-max", type=float, default=0.15)
@click.option("--dpi-minus-min", type=float, default=-0.15)
@click.option("--jobs", type=int, default=1)
def sweep(config_path, out_path, seed, grid_n, dpi_plus_max, dpi_minus_min, jobs):
    """Tariff-perturbation sweep: endogenous vs fixed-capacity surfaces."""

    def body():
        cfg = load_config(config_path, seed)
        grid = run_sweep(
            cfg.scenario,
            dpi_plus_range=(0.0, dpi_plus_max),
            dpi_minus_range=(dpi_minus_min, 0.0),
            grid_n=grid_n,
            n_jobs=jobs,
        )
        out, close = _open_out(out_path)
        try:
            write_sweep_csv(out, grid)
        finally:
            if close:
                out.close()

    _run(body)


@main.command(name="synth-data")
@out_opt
@seed_opt
def synth_data(out_path, seed):
    """Generate the synthetic hourly demand/capacity-factor year."""

    def body():
        env = os.environ.get("NEM_SIZER_SEED")
        s = seed if seed is not None else (int(env) if env else DEFAULT_SEED)
        write_hourly_csv(out_path if out_path else sys.stdout,
                         synth_generate(s))

    _run(body)


if __name__ == "__main__":
    main()
