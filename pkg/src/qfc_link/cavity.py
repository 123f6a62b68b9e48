"""Monolithic pump-enhancement cavity figures.

Finesse, resonant power enhancement, circulating power, round-trip
loss inference, and the Gaussian mode of a symmetric monolithic
resonator with spherically polished end facets.

Units: SI (lengths in meters, powers in watts). Reflectivities are
power reflectivities. `round_trip_extra_loss` is the fractional power
loss per round trip beyond the facet transmissions.

Convention: the round-trip survival factor is

    rho = sqrt(R_in * R_out) * (1 - extra_loss)

and the Airy (FSR/FWHM) finesse and resonant enhancement are

    F = pi * sqrt(rho) / (1 - rho)
    E = T_in / (1 - rho)^2,  T_in = 1 - R_in.

Lossless symmetric facets with R = 0.98 give F = 155.5 and E = 50.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "CavitySpec",
    "CavityFigures",
    "finesse",
    "infer_round_trip_loss",
    "enhancement",
    "circulating_power",
    "resonator_mode",
    "cavity_figures",
]

_FINESSE_TOL = 1e-9


@dataclass
class CavitySpec:
    """Facet and geometry parameters of the monolithic cavity."""

    reflectivity_in: float
    reflectivity_out: float
    round_trip_extra_loss: float
    geometric_length: float
    facet_curvature_radius: float
    index_at_pump: float

    def __post_init__(self):
        if not 0.0 < self.reflectivity_in < 1.0:
            raise ValueError("reflectivity_in must lie in (0, 1)")
        if not 0.0 < self.reflectivity_out < 1.0:
            raise ValueError("reflectivity_out must lie in (0, 1)")
        if not 0.0 <= self.round_trip_extra_loss < 1.0:
            raise ValueError("round_trip_extra_loss must lie in [0, 1)")
        if not self.geometric_length > 0:
            raise ValueError("geometric_length must be positive")
        if not self.facet_curvature_radius > 0:
            raise ValueError("facet_curvature_radius must be positive")
        if not self.index_at_pump > 0:
            raise ValueError("index_at_pump must be positive")
        # Gaussian-mode stability of the symmetric resonator.
        if not 2.0 * self.facet_curvature_radius - self.geometric_length > 0:
            raise ValueError(
                "unstable resonator: need 2*R_curv > geometric_length "
                f"(got R_curv={self.facet_curvature_radius}, "
                f"L={self.geometric_length})")


@dataclass
class CavityFigures:
    """Derived cavity numbers, as emitted by the CLI."""

    finesse: float
    enhancement: float
    circulating_power: float
    mode_rayleigh_range: float
    focusing_parameter: float

    def __post_init__(self):
        for name in ("finesse", "enhancement", "circulating_power",
                     "mode_rayleigh_range", "focusing_parameter"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


def _round_trip_survival(spec: CavitySpec) -> float:
    rho = math.sqrt(spec.reflectivity_in * spec.reflectivity_out) \
        * (1.0 - spec.round_trip_extra_loss)
    if rho >= 1.0:
        raise ValueError(f"round-trip survival {rho} >= 1: no steady state")
    return rho


def finesse(spec: CavitySpec) -> float:
    """Airy finesse F = pi sqrt(rho) / (1 - rho)."""
    rho = _round_trip_survival(spec)
    return math.pi * math.sqrt(rho) / (1.0 - rho)


def enhancement(spec: CavitySpec) -> float:
    """Resonant power enhancement E = T_in / (1 - rho)^2.

    Ratio of circulating to mode-matched incident power at exact
    resonance; spatial mismatch is accounted separately (see
    circulating_power).
    """
    rho = _round_trip_survival(spec)
    return (1.0 - spec.reflectivity_in) / (1.0 - rho) ** 2


def infer_round_trip_loss(measured_finesse: float, reflectivity_in: float,
                          reflectivity_out: float) -> float:
    """Extra round-trip loss explaining a measured finesse.

    Inverts the finesse relation by bisection on the round-trip
    survival rho until the finesse residual is below 1e-9, then maps
    rho back to the loss: extra = 1 - rho / sqrt(R_in R_out).

    Raises ValueError when the measured finesse exceeds the lossless
    bound for the given reflectivities.
    """
    if not measured_finesse > 0:
        raise ValueError("measured finesse must be positive")
    r_prod = math.sqrt(reflectivity_in * reflectivity_out)
    if not 0.0 < r_prod < 1.0:
        raise ValueError("reflectivities must lie in (0, 1)")
    lossless = math.pi * math.sqrt(r_prod) / (1.0 - r_prod)
    if measured_finesse > lossless:
        raise ValueError(
            f"measured finesse {measured_finesse} exceeds the lossless bound "
            f"{lossless:.4f} for these reflectivities")

    def f_of_rho(rho):
        return math.pi * math.sqrt(rho) / (1.0 - rho)

    lo, hi = 0.0, r_prod  # F(hi) = lossless >= measured, F(0) = 0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f_of_rho(mid) < measured_finesse:
            lo = mid
        else:
            hi = mid
        if abs(f_of_rho(0.5 * (lo + hi)) - measured_finesse) < _FINESSE_TOL:
            break
    rho = 0.5 * (lo + hi)
    return 1.0 - rho / r_prod


def circulating_power(p_in: float, mode_coupling: float,
                      enhancement_factor: float) -> float:
    """Intracavity power: incident power x mode coupling x enhancement."""
    if p_in < 0:
        raise ValueError("incident power must be nonnegative")
    if not 0.0 <= mode_coupling <= 1.0:
        raise ValueError("mode_coupling must lie in [0, 1]")
    if enhancement_factor < 0:
        raise ValueError("enhancement must be nonnegative")
    return p_in * mode_coupling * enhancement_factor


def resonator_mode(spec: CavitySpec, lambda_pump: float | None = None
                   ) -> tuple[float, float]:
    """Gaussian mode of the symmetric monolithic resonator.

    Matches the mode's wavefront curvature R(z) = z (1 + (z_R/z)^2) to
    the facet curvature at z = L/2, giving

        z_R = (L/2) sqrt(2 R_curv / L - 1),   xi = L / (2 z_R).

    Returns (rayleigh_range [m], focusing_parameter). The pump
    wavelength is accepted for interface symmetry but does not enter:
    curvature matching at normal incidence is achromatic (and the
    index cancels inside the homogeneous crystal).
    """
    ratio = 2.0 * spec.facet_curvature_radius / spec.geometric_length - 1.0
    if ratio <= 0:
        raise ValueError(
            "unstable resonator mode: need R_curv > L/2 "
            f"(got R_curv={spec.facet_curvature_radius}, L={spec.geometric_length})")
    z_r = 0.5 * spec.geometric_length * math.sqrt(ratio)
    xi = spec.geometric_length / (2.0 * z_r)
    return z_r, xi


def cavity_figures(spec: CavitySpec, p_in: float, mode_coupling: float) -> CavityFigures:
    """Assemble the full set of cavity figures for one spec."""
    f = finesse(spec)
    e = enhancement(spec)
    z_r, xi = resonator_mode(spec)
    return CavityFigures(
        finesse=f,
        enhancement=e,
        circulating_power=circulating_power(p_in, mode_coupling, e),
        mode_rayleigh_range=z_r,
        focusing_parameter=xi,
    )
