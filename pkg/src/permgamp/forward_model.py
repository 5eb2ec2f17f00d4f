"""Per-ray gains, dB link gains, the full forward map, and its linearization.

The per-ray power gain is Friis spreading times the product of power
reflection coefficients over the ray's bounces,

    g = (lambda / (4 pi d))^2 * prod_b |Gamma(eps_b, theta_b)|^2 ,

and a link's gain in dB is the energy superposition over its rays,

    gain_db = 10 log10( sum_j g_j ).

Permittivities are plain float vectors ordered by material index (entry m
is material m+1). The linearization at a point x is the pair (A, mu) with
A the Jacobian d gain_db / d eps and mu = gain(x) - A x, so the affine
surrogate is gain(x') ~= A x' + mu.

Reflections are lossless-dielectric Fresnel with a scenario-wide
polarization (TE by default):

    Gamma_TE = (cos t - sqrt(eps - sin^2 t)) / (cos t + sqrt(eps - sin^2 t))
    Gamma_TM = (eps cos t - sqrt(eps - sin^2 t)) / (eps cos t + sqrt(eps - sin^2 t))
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UnusableLinkError
from .raytracer import Ray
from .scenario import Scenario

GAIN_FLOOR = 1e-30          # linear; below this a link is unusable at that eps
DB_PER_LN = 10.0 / math.log(10.0)
DEFAULT_FD_STEP = 1e-6

JACOBIAN_METHODS = ("analytic", "central_fd")


def fresnel_power_coeff(eps, theta, polarization: str = "TE"):
    """Power reflection coefficient |Gamma|^2; accepts scalars or arrays.

    eps >= 1 keeps sqrt(eps - sin^2 theta) real, so the coefficient of a
    lossless dielectric is a plain square.
    """
    eps = np.asarray(eps, dtype=float)
    if np.any(eps < 1.0):
        raise ValueError(f"eps={eps} below 1 (passive dielectric)")
    if not 0.0 <= theta < math.pi / 2.0:
        raise ValueError(f"theta={theta} outside [0, pi/2)")
    c = math.cos(theta)
    # eps - sin^2 = (eps - 1) + cos^2: exact at eps = 1, no cancellation
    s = np.sqrt((eps - 1.0) + c * c)
    if polarization == "TE":
        gamma = (c - s) / (c + s)
    elif polarization == "TM":
        gamma = (eps * c - s) / (eps * c + s)
    else:
        raise ValueError(f"polarization={polarization!r} not in ('TE', 'TM')")
    out = np.where(eps == 1.0, 0.0, gamma * gamma)  # vacuum reflects nothing
    return out if out.ndim else float(out)


def fresnel_power_coeff_deriv(eps, theta, polarization: str = "TE"):
    """d|Gamma|^2 / d eps, closed form (chain rule through sqrt(eps - sin^2))."""
    eps = np.asarray(eps, dtype=float)
    if np.any(eps < 1.0):
        raise ValueError(f"eps={eps} below 1 (passive dielectric)")
    if not 0.0 <= theta < math.pi / 2.0:
        raise ValueError(f"theta={theta} outside [0, pi/2)")
    c = math.cos(theta)
    sin2 = math.sin(theta) ** 2
    s = np.sqrt((eps - 1.0) + c * c)
    if polarization == "TE":
        gamma = (c - s) / (c + s)
        dgamma = -c / (s * (c + s) ** 2)
    elif polarization == "TM":
        gamma = (eps * c - s) / (eps * c + s)
        dgamma = c * (eps - 2.0 * sin2) / (s * (eps * c + s) ** 2)
    else:
        raise ValueError(f"polarization={polarization!r} not in ('TE', 'TM')")
    out = np.where(eps == 1.0, 0.0, 2.0 * gamma * dgamma)
    return out if out.ndim else float(out)


def ray_gain_linear(ray: Ray, eps, wavelength_m: float, polarization: str = "TE"):
    """Linear power gain of one ray; LOS has an empty reflection product."""
    eps = np.asarray(eps, dtype=float)
    g = (wavelength_m / (4.0 * math.pi * ray.total_length_m)) ** 2
    for ref in ray.reflections:
        g = g * fresnel_power_coeff(
            eps[ref.material_index - 1], ref.incidence_angle, polarization
        )
    return g


def link_gain_db(rays, eps, wavelength_m: float, polarization: str = "TE") -> float:
    """10 log10 of the summed linear ray gains (energy superposition)."""
    total = 0.0
    for ray in rays:
        total += ray_gain_linear(ray, eps, wavelength_m, polarization)
    if total < GAIN_FLOOR:
        raise UnusableLinkError(
            f"total linear gain {total:.3e} below floor at eps={np.asarray(eps)}"
        )
    return 10.0 * math.log10(total)


def forward(scenario: Scenario, ray_cache, eps) -> np.ndarray:
    """dB link gains for every link at the permittivity vector eps."""
    eps = np.asarray(eps, dtype=float)
    out = np.empty(len(ray_cache))
    for n, rays in enumerate(ray_cache):
        try:
            out[n] = link_gain_db(
                rays, eps, scenario.wavelength_m, scenario.polarization
            )
        except UnusableLinkError as exc:
            raise UnusableLinkError(f"link {n}: {exc}") from exc
    return out


@dataclass(frozen=True)
class Linearization:
    """Affine surrogate around expansion_point: gain(x) ~= a_matrix @ x + mu."""

    a_matrix: np.ndarray     # (N, M), dB per unit permittivity
    mu: np.ndarray           # (N,), dB
    expansion_point: np.ndarray
    warnings: tuple[str, ...] = ()


def _analytic_rows(scenario: Scenario, ray_cache, eps: np.ndarray) -> np.ndarray:
    wl, pol = scenario.wavelength_m, scenario.polarization
    n_links, n_mat = len(ray_cache), len(eps)
    a = np.zeros((n_links, n_mat))
    for n, rays in enumerate(ray_cache):
        total = 0.0
        dtotal = np.zeros(n_mat)
        for ray in rays:
            friis = (wl / (4.0 * math.pi * ray.total_length_m)) ** 2
            coeffs = [
                fresnel_power_coeff(eps[r.material_index - 1], r.incidence_angle, pol)
                for r in ray.reflections
            ]
            g = friis * math.prod(coeffs)
            total += g
            # Product rule: each bounce contributes the product of the other
            # coefficients times its own derivative in eps.
            for b, ref in enumerate(ray.reflections):
                others = math.prod(c for i, c in enumerate(coeffs) if i != b)
                d = fresnel_power_coeff_deriv(
                    eps[ref.material_index - 1], ref.incidence_angle, pol
                )
                dtotal[ref.material_index - 1] += friis * others * d
        if total < GAIN_FLOOR:
            raise UnusableLinkError(
                f"link {n}: total linear gain below floor at eps={eps}"
            )
        a[n] = DB_PER_LN * dtotal / total
    return a


def jacobian(
    scenario: Scenario,
    ray_cache,
    eps,
    method: str = "analytic",
    fd_step: float = DEFAULT_FD_STEP,
) -> Linearization:
    """Linearization (A, mu) of the forward map at eps.

    "analytic" differentiates the Fresnel products in closed form;
    "central_fd" is the finite-difference cross-check. A central step that
    would cross the eps = 1 boundary degrades to a one-sided difference and
    is flagged in the warnings.
    """
    eps = np.asarray(eps, dtype=float)
    warnings: list[str] = []
    if method == "analytic":
        a = _analytic_rows(scenario, ray_cache, eps)
    elif method == "central_fd":
        n_mat = len(eps)
        a = np.zeros((len(ray_cache), n_mat))
        for m in range(n_mat):
            e_hi = eps.copy()
            e_hi[m] += fd_step
            if eps[m] - fd_step >= 1.0:
                e_lo = eps.copy()
                e_lo[m] -= fd_step
                a[:, m] = (
                    forward(scenario, ray_cache, e_hi)
                    - forward(scenario, ray_cache, e_lo)
                ) / (2.0 * fd_step)
            else:
                a[:, m] = (
                    forward(scenario, ray_cache, e_hi)
                    - forward(scenario, ray_cache, eps)
                ) / fd_step
                warnings.append(
                    f"fd: one-sided difference for material {m + 1} at eps={eps[m]}"
                )
    else:
        raise ValueError(f"method={method!r} not in {JACOBIAN_METHODS}")
    g0 = forward(scenario, ray_cache, eps)
    mu = g0 - a @ eps
    return Linearization(
        a_matrix=a, mu=mu, expansion_point=eps.copy(), warnings=tuple(warnings)
    )
