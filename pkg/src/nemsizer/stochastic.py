"""Capacity-factor distributions and a regime-aware expectation engine.

The case-study distribution is a normal clipped to [0, psi_max], which
puts point masses (atoms) at both support endpoints plus a continuous
density between them.  Expectations are computed as atom contributions
plus adaptive Gauss-Legendre quadrature on the continuous part, with
mandatory breakpoint insertion at dispatch-regime boundaries so each
quadrature segment is smooth.

Integrand callables must accept numpy arrays (they are evaluated on
quadrature nodes and Monte Carlo samples in bulk).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.stats import norm

from .utility import Thresholds

DEFAULT_ATOL = 1e-9
_GL_ORDER = 32
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(_GL_ORDER)
_MAX_DEPTH = 24


class NumericalError(RuntimeError):
    """Non-finite or non-convergent numerical evaluation."""


@dataclass(frozen=True)
class PointMass:
    """Degenerate distribution at a single capacity-factor value."""

    value: float

    def __post_init__(self):
        if self.value < 0:
            raise ValueError(f"point mass below support: {self.value}")

    @property
    def support_max(self) -> float:
        return self.value

    def mean(self) -> float:
        return self.value


@dataclass(frozen=True)
class ClippedNormal:
    """Normal(mu, sigma) clipped to [0, psi_max], with boundary atoms."""

    mu: float
    sigma: float
    psi_max: float

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.psi_max <= 0:
            raise ValueError(f"psi_max must be positive, got {self.psi_max}")

    @property
    def support_max(self) -> float:
        return self.psi_max

    @property
    def atom_at_zero(self) -> float:
        return float(norm.cdf(-self.mu / self.sigma))

    @property
    def atom_at_max(self) -> float:
        return float(norm.sf((self.psi_max - self.mu) / self.sigma))

    def mean(self) -> float:
        return expect(self, lambda x: x)


CapacityFactorDist = PointMass | ClippedNormal


@dataclass(frozen=True)
class PiecewiseIntegrand:
    """A piecewise-smooth integrand with known kink locations.

    ``func`` must be vectorized over psi.  ``breakpoints`` mark the kink
    positions; quadrature never integrates across them.
    """

    func: Callable
    breakpoints: tuple[float, ...] = ()


def _as_integrand(f) -> PiecewiseIntegrand:
    if isinstance(f, PiecewiseIntegrand):
        return f
    return PiecewiseIntegrand(func=f)


def _eval_scalar(func, x: float) -> float:
    v = float(np.asarray(func(np.asarray([x])))[0])
    if not np.isfinite(v):
        raise NumericalError(f"integrand non-finite at psi={x}")
    return v


def _gauss_segment(func, dist: ClippedNormal, a: float, b: float) -> float:
    x = 0.5 * (a + b) + 0.5 * (b - a) * _GL_NODES
    vals = np.asarray(func(x)) * norm.pdf(x, loc=dist.mu, scale=dist.sigma)
    if not np.all(np.isfinite(vals)):
        raise NumericalError(f"integrand non-finite on segment [{a}, {b}]")
    return 0.5 * (b - a) * float(_GL_WEIGHTS @ vals)


def _adaptive(func, dist: ClippedNormal, a: float, b: float, tol: float,
              depth: int = 0) -> float:
    whole = _gauss_segment(func, dist, a, b)
    mid = 0.5 * (a + b)
    left = _gauss_segment(func, dist, a, mid)
    right = _gauss_segment(func, dist, mid, b)
    if abs(whole - (left + right)) <= tol or depth >= _MAX_DEPTH:
        return left + right
    return (
        _adaptive(func, dist, a, mid, 0.5 * tol, depth + 1)
        + _adaptive(func, dist, mid, b, 0.5 * tol, depth + 1)
    )


def expect(dist: CapacityFactorDist, f, atol: float = DEFAULT_ATOL) -> float:
    """E[f(psi)] under ``dist``; atoms plus per-segment quadrature."""
    pw = _as_integrand(f)
    if isinstance(dist, PointMass):
        return _eval_scalar(pw.func, dist.value)

    edges = sorted(
        {0.0, dist.psi_max}
        | {bp for bp in pw.breakpoints if 0.0 < bp < dist.psi_max}
    )
    total = dist.atom_at_zero * _eval_scalar(pw.func, 0.0)
    total += dist.atom_at_max * _eval_scalar(pw.func, dist.psi_max)
    n_seg = len(edges) - 1
    for a, b in zip(edges[:-1], edges[1:]):
        total += _adaptive(pw.func, dist, a, b, atol / n_seg)
    return total


def mc_expect(
    dist: CapacityFactorDist, f, n: int, seed: int
) -> tuple[float, float]:
    """Seeded Monte Carlo estimate of E[f(psi)]; returns (mean, stderr).

    Uses the counter-based Philox generator so per-task seeds can be
    derived reproducibly in parallel sweeps.
    """
    if n < 2:
        raise ValueError(f"need n >= 2 samples, got {n}")
    pw = _as_integrand(f)
    if isinstance(dist, PointMass):
        return _eval_scalar(pw.func, dist.value), 0.0
    rng = np.random.Generator(np.random.Philox(seed))
    psi = np.clip(rng.normal(dist.mu, dist.sigma, size=n), 0.0, dist.psi_max)
    vals = np.asarray(pw.func(psi), dtype=float)
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(n))


def _prob_below(dist: CapacityFactorDist, x: float) -> float:
    """P(psi < x), strict, accounting for boundary atoms."""
    if isinstance(dist, PointMass):
        return 1.0 if dist.value < x else 0.0
    if x <= 0.0:
        return 0.0
    if x > dist.psi_max:
        return 1.0
    # zero-atom plus continuous mass on (0, x) collapses to the normal CDF
    return float(norm.cdf((x - dist.mu) / dist.sigma))


def _prob_above(dist: CapacityFactorDist, x: float) -> float:
    """P(psi > x), strict, accounting for boundary atoms."""
    if isinstance(dist, PointMass):
        return 1.0 if dist.value > x else 0.0
    if x < 0.0:
        return 1.0
    if x >= dist.psi_max:
        return 0.0
    return float(norm.sf((x - dist.mu) / dist.sigma))


def regime_probabilities(
    dist: CapacityFactorDist, g: float, th: Thresholds
) -> tuple[float, float, float]:
    """Probabilities of the import / net-zero / export dispatch regimes.

    Boundary ties (psi*g exactly at a threshold) count as net-zero,
    matching the closed net-zero interval of the dispatch rule.
    """
    if g < 0:
        raise ValueError(f"negative capacity: {g}")
    if g == 0.0:
        if th.d_plus > 0.0:
            return (1.0, 0.0, 0.0)
        return (0.0, 1.0, 0.0)
    p_imp = _prob_below(dist, th.d_plus / g)
    p_exp = _prob_above(dist, th.d_minus / g)
    return (p_imp, max(0.0, 1.0 - p_imp - p_exp), p_exp)
