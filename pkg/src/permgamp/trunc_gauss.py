"""Moments of a Gaussian restricted to an interval.

This is the input-channel posterior of the solver: an N(c_hat, tau_c)
density truncated to the intersection of the prior box and the trust
region. With s = sqrt(tau_c), alpha = (lo - c)/s, beta = (hi - c)/s and
Z = Phi(beta) - Phi(alpha),

    mean = c + s * (phi(alpha) - phi(beta)) / Z
    var  = tau_c * (1 + (alpha phi(alpha) - beta phi(beta))/Z
                      - ((phi(alpha) - phi(beta))/Z)^2)

evaluated in four regimes to stay accurate when the interval sits far in
a tail or is narrow relative to s:

* interval narrow in sigma units (beta - alpha <= 1): fixed 64-node
  Gauss-Legendre on the re-centered density; the closed-form bracket
  1 + r2 - r1^2 cancels catastrophically here, the quadrature does not;
* both endpoints on one side of c: ratios through the scaled complementary
  error function erfcx (phi and Z underflow individually, their ratios do
  not), with expm1 for the phi difference;
* interval straddling c: direct erf-based Z (the two erf terms add, no
  cancellation) and expm1 for the phi difference;
* hopeless cases (rounding pushed the mean onto an endpoint or the
  variance to zero): mean = nearest endpoint -/+ sqrt(floor) and
  var = floor with floor = 1e-12 (hi-lo)^2, so iterating callers never see
  NaN, inf, or an out-of-interval mean.

Phi/phi come from scipy.special (Cephes erf/erfcx, accurate to a couple
ulp in double precision).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf, erfcx

SQRT_HALF_PI = math.sqrt(math.pi / 2.0)
INV_SQRT_2 = 1.0 / math.sqrt(2.0)
VAR_FLOOR_SCALE = 1e-12  # variance floor = scale * width^2

# Fixed-order Gauss-Legendre rule for the narrow-interval branch.
_GL_U, _GL_W = np.polynomial.legendre.leggauss(64)


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"interval [{self.lo}, {self.hi}] needs lo < hi")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def intersect(self, other: "Interval") -> "Interval":
        return Interval(max(self.lo, other.lo), min(self.hi, other.hi))


def clamp_to_interval(x: float, interval: Interval) -> float:
    return min(interval.hi, max(interval.lo, x))


def _mills(x: float) -> float:
    """Phi_c(x) / phi(x) = sqrt(pi/2) * erfcx(x / sqrt(2)), for x >= 0."""
    return SQRT_HALF_PI * erfcx(x * INV_SQRT_2)


def _one_sided_ratios(alpha: float, beta: float) -> tuple[float, float]:
    """(phi(a)-phi(b))/Z and (a phi(a) - b phi(b))/Z for 0 <= alpha < beta.

    Z/phi(alpha) = F(alpha) - d F(beta) with d = phi(beta)/phi(alpha) <= 1
    and F the Mills ratio; everything is evaluated in factored forms that
    avoid subtracting nearly equal numbers.
    """
    fa = _mills(alpha)
    fb = _mills(beta)
    expo = 0.5 * (alpha - beta) * (alpha + beta)  # (a^2 - b^2)/2 <= 0
    d = math.exp(expo)
    one_minus_d = -math.expm1(expo)
    denom = fa * one_minus_d + d * (fa - fb)
    if denom <= 0.0 or not math.isfinite(denom):
        return math.inf, math.inf  # caller falls back to the floor
    r1 = one_minus_d / denom
    r2 = (alpha * one_minus_d - d * (beta - alpha)) / denom
    return r1, r2


def _narrow_moments(
    c_hat: float, s: float, alpha: float, beta: float
) -> tuple[float, float]:
    """Moments via Gauss-Legendre when the interval is narrow in sigma units.

    In u = (x - mid)/s the density is exp(gamma u - u^2/2) up to a
    constant, gamma = (c - mid)/s. The closed-form ratios cancel
    catastrophically here, while a 64-node rule integrates the gently
    varying exponential to machine precision (the exponent is re-centered
    at its maximum, so tails cost nothing).
    """
    mid = 0.5 * (alpha + beta)
    h = 0.5 * (beta - alpha)
    u = h * _GL_U
    f = -mid * u - 0.5 * u * u
    f -= np.max(f)
    w = _GL_W * np.exp(f)
    z = float(np.sum(w))
    eu = float(np.sum(w * u)) / z
    vu = float(np.sum(w * (u - eu) ** 2)) / z
    return c_hat + s * (mid + eu), s * s * vu


def _straddle_ratios(alpha: float, beta: float) -> tuple[float, float]:
    """Same ratios for alpha <= 0 <= beta (Z is well away from underflow
    unless the interval is tiny, which expm1 keeps accurate)."""
    z = 0.5 * (erf(beta * INV_SQRT_2) - erf(alpha * INV_SQRT_2))
    if z <= 0.0:
        return math.inf, math.inf
    ea = 0.5 * alpha * alpha
    eb = 0.5 * beta * beta
    if ea <= eb:
        phi_a = math.exp(-ea) / math.sqrt(2.0 * math.pi)
        phi_diff = -phi_a * math.expm1(ea - eb)
        phi_b = phi_a - phi_diff
    else:
        phi_b = math.exp(-eb) / math.sqrt(2.0 * math.pi)
        phi_diff = phi_b * math.expm1(eb - ea)
        phi_a = phi_b + phi_diff
    r1 = phi_diff / z
    r2 = (alpha * phi_a - beta * phi_b) / z
    return r1, r2


def truncated_moments(
    c_hat: float, tau_c: float, interval: Interval
) -> tuple[float, float]:
    """Mean and variance of N(c_hat, tau_c) truncated to the interval.

    Guaranteed: mean strictly inside (lo, hi), 0 < variance, both finite,
    for any finite inputs with tau_c > 0.
    """
    if not tau_c > 0.0:
        raise ValueError(f"tau_c={tau_c} must be > 0")
    lo, hi = interval.lo, interval.hi
    s = math.sqrt(tau_c)
    alpha = (lo - c_hat) / s
    beta = (hi - c_hat) / s

    if beta - alpha <= 1.0 and abs(alpha + beta) * (beta - alpha) <= 160.0:
        mean, var = _narrow_moments(c_hat, s, alpha, beta)
    else:
        if alpha >= 0.0:
            r1, r2 = _one_sided_ratios(alpha, beta)
        elif beta <= 0.0:
            r1, r2 = _one_sided_ratios(-beta, -alpha)
            r1 = -r1
        else:
            r1, r2 = _straddle_ratios(alpha, beta)
        mean = c_hat + s * r1
        var = tau_c * (1.0 + r2 - r1 * r1)

    floor = VAR_FLOOR_SCALE * interval.width**2
    if not math.isfinite(mean) or not lo < mean < hi:
        edge = lo if abs(c_hat - lo) <= abs(c_hat - hi) else hi
        mean = edge + math.sqrt(floor) if edge == lo else edge - math.sqrt(floor)
    if not math.isfinite(var) or var < floor:
        var = floor
    return mean, var
