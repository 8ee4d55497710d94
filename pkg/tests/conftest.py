"""Shared randomized-scenario builders for the test suite."""

from dataclasses import replace

import numpy as np
import pytest

from nemsizer.scenario import Scenario
from nemsizer.sizing import flat_bound, marginal_value
from nemsizer.stochastic import ClippedNormal, PointMass
from nemsizer.tariff import PeriodPrice, ValidatedSchedule
from nemsizer.utility import QuadraticUtility


def random_scenario(rng, n_periods=None, dist="point", g_max=10.0):
    """A small random multi-period scenario on the psi-in-[0,1] scale.

    ``dist`` selects the capacity-factor family: "point", "clipped", or
    "mixed".  The capacity cost is left at 0; callers set it.
    """
    n = int(n_periods) if n_periods is not None else int(rng.integers(1, 4))
    prices, utils, dists = [], [], []
    for _ in range(n):
        pi_plus = float(rng.uniform(0.25, 0.7))
        pi_minus = pi_plus * float(rng.uniform(0.3, 0.95))
        prices.append(PeriodPrice(pi_plus, pi_minus))
        utils.append(QuadraticUtility(
            a=float(rng.uniform(pi_plus + 0.3, pi_plus + 1.5)),
            b=float(rng.uniform(0.2, 0.9)),
        ))
        kind = dist
        if dist == "mixed":
            kind = "point" if rng.random() < 0.5 else "clipped"
        if kind == "point":
            dists.append(PointMass(float(rng.uniform(0.3, 1.0))))
        else:
            dists.append(ClippedNormal(
                mu=float(rng.uniform(0.2, 0.8)),
                sigma=float(rng.uniform(0.08, 0.35)),
                psi_max=1.0,
            ))
    sched = ValidatedSchedule.from_period_prices(prices)
    return Scenario(sched, tuple(utils), tuple(dists), c_g=0.0, g_max=g_max)


def interior_scenario(rng, n_periods=None, dist="point", g_max=10.0,
                      max_tries=200):
    """A random scenario whose capacity cost puts g* strictly interior.

    The cost is set to F(g_target) for a g_target beyond the flat region
    at which F is strictly decreasing, so bisection has a unique root.
    """
    for _ in range(max_tries):
        scn = random_scenario(rng, n_periods=n_periods, dist=dist, g_max=g_max)
        fb = min(flat_bound(scn), g_max)
        if fb >= 0.6 * g_max:
            continue
        g_target = float(rng.uniform(1.1 * fb + 0.05, 0.9 * g_max))
        c = marginal_value(scn, g_target)
        if c <= 1e-6:
            continue
        # need strict local decrease (root isolation) and interiority
        if marginal_value(scn, 1.02 * g_target) >= c - 1e-8:
            continue
        if c >= marginal_value(scn, 0.0) - 1e-6:
            continue
        if c <= marginal_value(scn, g_max) + 1e-6:
            continue
        return replace(scn, c_g=c)
    raise RuntimeError("failed to draw an interior scenario")


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(20260823))


#: (criterion label, passed, detail) tuples recorded by the acceptance
#: tests; echoed as one line per criterion after the run.
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in ACCEPTANCE_RESULTS:
        verdict = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[{verdict}] {label}: {detail}")
