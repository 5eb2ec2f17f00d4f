"""Independent ground-truth machinery for tests and acceptance checks.

Everything here is deliberately brute force: the exact log-posterior of the
estimation problem, an exhaustive grid argmax over the prior box, and
adaptive-quadrature moments of the truncated-Gaussian input channel. The
iterative solver never imports this module (and this module never imports
the solver), so the two sides stay independent.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from .errors import GridSizeError, ValidationError
from .forward_model import forward, fresnel_power_coeff
from .scenario import Scenario
from .trunc_gauss import Interval

GRID_GUARD = 10_000_000  # max number of grid nodes
SIGMA_VAR_FLOOR = 1e-12  # dB^2; keeps sigma_z = 0 arithmetic finite
QUAD_ABS_TARGET = 1e-11


def log_posterior(scenario: Scenario, ray_cache, y, eps, sigma_z: float) -> float:
    """Log posterior of eps given normalized measurements y, up to a constant.

    Uniform box prior: -inf outside the prior bounds, otherwise the
    Gaussian log-likelihood -sum (y_n - gain_n(eps))^2 / (2 sigma_z^2).
    """
    eps = np.asarray(eps, dtype=float)
    lo, hi = scenario.prior_bounds()
    if np.any(eps < lo) or np.any(eps > hi):
        return -math.inf
    var = max(sigma_z**2, SIGMA_VAR_FLOOR)
    resid = np.asarray(y, dtype=float) - forward(scenario, ray_cache, eps)
    return float(-0.5 * np.dot(resid, resid) / var)


@dataclass(frozen=True)
class GridSpec:
    """Uniform per-material grid step; bounds come from the priors."""

    step: float = 0.05

    def __post_init__(self):
        if not self.step > 0:
            raise ValidationError(f"grid step={self.step} must be > 0")


def grid_axes(scenario: Scenario, grid: GridSpec) -> list[np.ndarray]:
    lo, hi = scenario.prior_bounds()
    axes = []
    for m in range(scenario.n_materials):
        count = int(math.floor((hi[m] - lo[m]) / grid.step + 1e-9)) + 1
        axes.append(lo[m] + grid.step * np.arange(count))
    return axes


def _grid_gains(scenario: Scenario, ray_cache, eps_nodes: np.ndarray) -> np.ndarray:
    """Forward gains for every grid node: (n_nodes, n_links).

    Same Friis-times-Fresnel arithmetic as the forward map, evaluated with
    the permittivity axis vectorized so exhaustive scans stay cheap.
    """
    wl, pol = scenario.wavelength_m, scenario.polarization
    n_nodes = eps_nodes.shape[0]
    gains = np.empty((n_nodes, len(ray_cache)))
    for n, rays in enumerate(ray_cache):
        total = np.zeros(n_nodes)
        for ray in rays:
            g = np.full(n_nodes, (wl / (4.0 * math.pi * ray.total_length_m)) ** 2)
            for ref in ray.reflections:
                g = g * fresnel_power_coeff(
                    eps_nodes[:, ref.material_index - 1], ref.incidence_angle, pol
                )
            total += g
        gains[:, n] = 10.0 * np.log10(total)
    return gains


def grid_map(scenario: Scenario, ray_cache, y, sigma_z: float, grid: GridSpec) -> np.ndarray:
    """Exhaustive argmax of the log posterior over the Cartesian prior grid.

    Ties resolve to the lexicographically smallest node (first hit in
    row-major order). sigma_z only scales the posterior, so the argmax is
    returned for any sigma_z >= 0.
    """
    axes = grid_axes(scenario, grid)
    size = math.prod(len(ax) for ax in axes)
    if size > GRID_GUARD:
        raise GridSizeError(f"grid has {size} nodes (> {GRID_GUARD})")
    mesh = np.meshgrid(*axes, indexing="ij")
    eps_nodes = np.stack([m.reshape(-1) for m in mesh], axis=1)
    gains = _grid_gains(scenario, ray_cache, eps_nodes)
    ssr = np.einsum("ij,ij->i", gains - np.asarray(y), gains - np.asarray(y))
    best = int(np.argmin(ssr))  # first occurrence = lexicographically smallest
    return eps_nodes[best].copy()


def quadrature_moments(
    c_hat: float, tau_c: float, interval: Interval
) -> tuple[float, float]:
    """Truncated-Gaussian moments by adaptive quadrature of the definition.

    Integrates w(x) = exp(-((x - c)^2 - d0^2) / (2 tau)) with d0 the
    distance from c to the interval (zero when inside); the constant shift
    cancels in the moment ratios and keeps the integrand's peak at 1. The
    domain is clipped to where the exponent stays above -800 (w underflows
    to exactly 0 beyond), so far-tail spikes are always resolved.
    """
    if not tau_c > 0.0:
        raise ValueError(f"tau_c={tau_c} must be > 0")
    lo, hi = interval.lo, interval.hi
    d0_sq = max(lo - c_hat, c_hat - hi, 0.0) ** 2

    def w(x):
        return math.exp(-((x - c_hat) ** 2 - d0_sq) / (2.0 * tau_c))

    r_cut = math.sqrt(d0_sq + 1600.0 * tau_c)
    a = max(lo, c_hat - r_cut)
    b = min(hi, c_hat + r_cut)
    if not a < b:  # interval entirely in the underflow region (cannot happen
        raise RuntimeError("empty effective support")  # with d0 from interval)
    s = math.sqrt(tau_c)
    pts = sorted({min(b, max(a, c_hat + k * s)) for k in (-3, -1, 0, 1, 3)})
    kw = dict(epsabs=1e-300, epsrel=1e-13, limit=500, points=pts)

    with warnings.catch_warnings():
        # Roundoff chatter is fine as long as the error estimates below
        # stay under the target.
        warnings.simplefilter("ignore", IntegrationWarning)
        z, z_err = quad(w, a, b, **kw)
        if z <= 0.0:
            raise RuntimeError(f"quadrature collapsed (Z={z:.3e})")
        m1, m1_err = quad(lambda x: x * w(x), a, b, **kw)
        mean = m1 / z
        v, v_err = quad(lambda x: (x - mean) ** 2 * w(x), a, b, **kw)
        var = v / z
    mean_err = (m1_err + abs(mean) * z_err) / z
    var_err = (v_err + var * z_err) / z
    if mean_err > QUAD_ABS_TARGET or var_err > QUAD_ABS_TARGET:
        raise RuntimeError(
            f"quadrature error above target (mean_err={mean_err:.2e}, "
            f"var_err={var_err:.2e})"
        )
    return mean, var
