"""Quasi-phase-matched difference-frequency conversion efficiency.

Implements the sin^2 pump-power law for cavity-enhanced DFG/SFG, the
Boyd-Kleinman focusing reduction factor for Gaussian beams, the full
conversion (saturation) pump power, quasi-phase-matching response and
bandwidth conversions, and the one-parameter depletion fit.

Units: SI throughout this module. Wavelengths and lengths in meters,
powers in watts, d_eff in m/V. Efficiencies and the focusing factors
are dimensionless.

Conventions:
- The wavelength triple (lambda_r, lambda_p, lambda_t) labels the
  short-wavelength input ("red"), the strong pump, and the long-
  wavelength target. Energy conservation: 1/lambda_r = 1/lambda_p
  + 1/lambda_t.
- Focusing parameter xi = L/b with b the confocal parameter (twice the
  Rayleigh range). The matched single-xi form is used: both interacting
  modes are assumed focused to the same xi. The unmatched two-argument
  generalization h_m(xi_a, xi_b) is intentionally not implemented; see
  `boyd_kleinman_hm`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize
from scipy.constants import c as _C_LIGHT
from scipy.constants import epsilon_0 as _EPS0

from .errors import FitError, NumericsError

__all__ = [
    "ConversionProcess",
    "FocusConfig",
    "DepletionSample",
    "PmaxFit",
    "complete_wavelength_triple",
    "boyd_kleinman_h",
    "boyd_kleinman_hm",
    "optimal_focusing",
    "full_conversion_power",
    "conversion_efficiency",
    "pump_for_target_efficiency",
    "phase_matching_response",
    "bandwidth_wavelength_from_frequency",
    "fit_full_conversion_power",
]

# Relative tolerance on 1/lr = 1/lp + 1/lt for stored triples. Rounded
# nominal wavelengths (e.g. 637/1064/1587 nm) must stay acceptable.
ENERGY_CONSERVATION_RTOL = 1e-4

_QUAD_ABS_TOL = 1e-9
_SIGMA_TOL = 1e-6


@dataclass
class ConversionProcess:
    """Material and geometry inputs of the three-wave mixing process.

    lambda_r, lambda_p, lambda_t: vacuum wavelengths [m] of the input,
    pump and target fields. n_r, n_p, n_t: refractive indices at those
    wavelengths. d_eff: effective nonlinear coefficient [m/V].
    crystal_length: interaction length L [m]. domain_length: poling
    domain length l [m] (poling period is 2*l).
    """

    lambda_r: float
    lambda_p: float
    lambda_t: float
    n_r: float
    n_p: float
    n_t: float
    d_eff: float
    crystal_length: float
    domain_length: float

    def __post_init__(self):
        for name in ("lambda_r", "lambda_p", "lambda_t", "n_r", "n_p", "n_t",
                     "d_eff", "crystal_length", "domain_length"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        lhs = 1.0 / self.lambda_r
        rhs = 1.0 / self.lambda_p + 1.0 / self.lambda_t
        if abs(lhs - rhs) > ENERGY_CONSERVATION_RTOL * lhs:
            raise ValueError(
                "wavelength triple violates energy conservation: "
                f"1/{self.lambda_r} != 1/{self.lambda_p} + 1/{self.lambda_t} "
                f"(relative residual {abs(lhs - rhs) / lhs:.3e})"
            )


@dataclass
class FocusConfig:
    """Focusing geometry for the Boyd-Kleinman factor.

    xi: focusing parameter L/b. sigma: dimensionless phase-mismatch
    offset inside the focusing integral; None means "optimize over
    sigma" (the h_m case).
    """

    xi: float
    sigma: float | None = None

    def __post_init__(self):
        if not self.xi > 0:
            raise ValueError("xi must be strictly positive")

    def factor(self) -> float:
        """Evaluate h(sigma, xi), optimizing sigma when it is None."""
        if self.sigma is None:
            return boyd_kleinman_hm(self.xi)
        return boyd_kleinman_h(self.sigma, self.xi)


@dataclass
class DepletionSample:
    """One point of a pump-depletion (conversion vs power) measurement.

    circulating_power [W], measured_internal_efficiency in [0, 1],
    efficiency_uncertainty (1-sigma, same units as efficiency) or None.

    Efficiencies outside [0, 1] by no more than the stated uncertainty
    are clamped with a warning (measurements can fluctuate above 1);
    anything further out is rejected.
    """

    circulating_power: float
    measured_internal_efficiency: float
    efficiency_uncertainty: float | None = None

    def __post_init__(self):
        if self.circulating_power < 0:
            raise ValueError("circulating_power must be nonnegative")
        if self.efficiency_uncertainty is not None and not self.efficiency_uncertainty > 0:
            raise ValueError("efficiency_uncertainty must be positive when given")
        eta = self.measured_internal_efficiency
        if not 0.0 <= eta <= 1.0:
            tol = self.efficiency_uncertainty or 0.0
            if -tol <= eta <= 1.0 + tol:
                clamped = min(max(eta, 0.0), 1.0)
                warnings.warn(
                    f"efficiency {eta} outside [0, 1] by <= its uncertainty; "
                    f"clamped to {clamped}", stacklevel=2)
                self.measured_internal_efficiency = clamped
            else:
                raise ValueError(
                    f"efficiency {eta} outside [0, 1] by more than its uncertainty")


def complete_wavelength_triple(lambda_a: float, lambda_b: float, roles: str) -> float:
    """Return the third vacuum wavelength of an energy-conserving triple.

    `roles` names the two given wavelengths, in order: "red+pump",
    "red+target" or "pump+target". All wavelengths in meters (any
    consistent length unit works; the relation is homogeneous).

    Raises ValueError when the requested completion is unphysical
    (e.g. a "red" input that is not the most energetic field).
    """
    if not (lambda_a > 0 and lambda_b > 0):
        raise ValueError("wavelengths must be positive")
    if roles == "red+pump":
        inv = 1.0 / lambda_a - 1.0 / lambda_b
        kind = "target"
    elif roles == "red+target":
        inv = 1.0 / lambda_a - 1.0 / lambda_b
        kind = "pump"
    elif roles == "pump+target":
        return 1.0 / (1.0 / lambda_a + 1.0 / lambda_b)
    else:
        raise ValueError(f"unknown roles {roles!r}")
    if inv <= 0:
        raise ValueError(
            f"no physical {kind} wavelength: the red field must carry more "
            f"energy than either output ({lambda_a} >= {lambda_b})")
    return 1.0 / inv


def boyd_kleinman_h(sigma: float, xi: float) -> float:
    """Focusing factor h(sigma, xi) for matched Gaussian beams.

    h(sigma, xi) = (1/4xi) * |integral_{-xi}^{xi} e^(i sigma tau) /
    (1 + i tau) dtau|^2, evaluated by adaptive quadrature of the real
    and imaginary parts to absolute tolerance 1e-9. At sigma = 0 the
    integral is 2 arctan(xi), so h = arctan(xi)^2 / xi.
    """
    if not xi > 0:
        raise ValueError("xi must be strictly positive")

    # e^(i s t) / (1 + i t) = [cos(st) + t sin(st) + i (sin(st) - t cos(st))] / (1 + t^2)
    def _re(t):
        return (math.cos(sigma * t) + t * math.sin(sigma * t)) / (1.0 + t * t)

    def _im(t):
        return (math.sin(sigma * t) - t * math.cos(sigma * t)) / (1.0 + t * t)

    re, re_err = integrate.quad(_re, -xi, xi, epsabs=_QUAD_ABS_TOL, limit=200)
    im, im_err = integrate.quad(_im, -xi, xi, epsabs=_QUAD_ABS_TOL, limit=200)
    if re_err > 1e-6 or im_err > 1e-6:
        raise NumericsError(
            f"focusing-factor quadrature did not converge at sigma={sigma}, "
            f"xi={xi}: error estimates ({re_err:.2e}, {im_err:.2e})")
    return (re * re + im * im) / (4.0 * xi)


def _maximize_over_sigma(xi: float) -> tuple[float, float]:
    """Return (sigma*, h(sigma*, xi)) on [0, hi], growing hi as needed."""
    hi = 6.0
    for _ in range(32):
        res = optimize.minimize_scalar(
            lambda s: -boyd_kleinman_h(s, xi), bounds=(0.0, hi),
            method="bounded", options={"xatol": _SIGMA_TOL})
        if not res.success:
            raise NumericsError(f"sigma optimization failed at xi={xi}: {res.message}")
        # Optimum pinned to the right edge means the bracket was too small.
        if hi - res.x > 1e-3:
            return float(res.x), float(-res.fun)
        hi *= 2.0
    raise NumericsError(f"sigma bracket expansion did not terminate at xi={xi}")


def boyd_kleinman_hm(xi: float) -> float:
    """Phase-mismatch-optimized focusing factor h_m(xi).

    Maximizes boyd_kleinman_h over sigma by bracketed 1-D optimization
    (sigma tolerance 1e-6, initial bracket [0, 6] expanded on demand).
    Peaks at 1.0677 near xi = 2.84; h_m -> xi in the plane-wave limit.

    Matched focusing only: both modes share one xi. The unmatched
    two-argument form is not computed here; quote results as the
    matched approximation.
    """
    if not xi > 0:
        raise ValueError("xi must be strictly positive")
    return _maximize_over_sigma(xi)[1]


def optimal_focusing(xi_lo: float = 0.1, xi_hi: float = 10.0) -> tuple[float, float]:
    """Locate the global optimum of h_m on [xi_lo, xi_hi].

    Returns (xi*, h_m(xi*)). h_m is unimodal on the default range with
    its maximum near xi = 2.84, h = 1.068.
    """
    if not 0 < xi_lo < xi_hi:
        raise ValueError("need 0 < xi_lo < xi_hi")
    res = optimize.minimize_scalar(
        lambda x: -boyd_kleinman_hm(x), bounds=(xi_lo, xi_hi),
        method="bounded", options={"xatol": 1e-5})
    if not res.success:
        raise NumericsError(f"xi optimization failed: {res.message}")
    return float(res.x), float(-res.fun)


def full_conversion_power(process: ConversionProcess, h: float) -> float:
    """Pump power [W] at which the sin^2 law first reaches unit efficiency.

    P_full = c eps0 n_t n_r lambda_t lambda_r lambda_p
             / (128 d_eff^2 L h)

    with h the focusing factor (typically h_m of the operating xi).
    """
    if not h > 0:
        raise ValueError("focusing factor h must be strictly positive")
    num = (_C_LIGHT * _EPS0 * process.n_t * process.n_r
           * process.lambda_t * process.lambda_r * process.lambda_p)
    den = 128.0 * process.d_eff ** 2 * process.crystal_length * h
    return num / den


def conversion_efficiency(p_pump: float, p_max: float) -> float:
    """Internal conversion efficiency sin^2((pi/2) sqrt(P/P_max)).

    Monotone increasing on [0, P_max], equal to 1 at P_max, and bounded
    in [0, 1] for all pump powers (over-driving reconverts).
    """
    if p_pump < 0:
        raise ValueError("pump power must be nonnegative")
    if not p_max > 0:
        raise ValueError("p_max must be strictly positive")
    return math.sin(0.5 * math.pi * math.sqrt(p_pump / p_max)) ** 2


def pump_for_target_efficiency(eta: float, p_max: float) -> float:
    """Inverse of conversion_efficiency on the first lobe [0, P_max]."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    if not p_max > 0:
        raise ValueError("p_max must be strictly positive")
    return p_max * (2.0 / math.pi * math.asin(math.sqrt(eta))) ** 2


def phase_matching_response(delta_k: float, length: float) -> float:
    """Quasi-phase-matching response sinc^2(delta_k * L / 2).

    delta_k is the residual wave-vector mismatch after poling [1/m].
    Even in delta_k; 1 at perfect matching; first null at
    delta_k L/2 = pi; half maximum at |delta_k L/2| = 1.39156.
    """
    if not length > 0:
        raise ValueError("length must be strictly positive")
    x = 0.5 * delta_k * length
    # np.sinc is sin(pi x)/(pi x)
    return float(np.sinc(x / np.pi) ** 2)


def bandwidth_wavelength_from_frequency(delta_nu: float, wavelength: float) -> float:
    """Convert a frequency bandwidth [Hz] to wavelength units [m].

    delta_lambda = lambda^2 * delta_nu / c, valid for delta_nu << c/lambda.
    """
    if delta_nu < 0 or not wavelength > 0:
        raise ValueError("need delta_nu >= 0 and wavelength > 0")
    return wavelength ** 2 * delta_nu / _C_LIGHT


@dataclass
class PmaxFit:
    """Result of fit_full_conversion_power."""

    p_max: float
    uncertainty: float
    residual_norm: float


def _efficiency_model_and_grad(powers: np.ndarray, p_full: float):
    """sin^2 law and its derivative wrt the single parameter."""
    u = 0.5 * np.pi * np.sqrt(powers / p_full)
    model = np.sin(u) ** 2
    grad = -u * np.sin(2.0 * u) / (2.0 * p_full)
    return model, grad


def fit_full_conversion_power(samples: list[DepletionSample]) -> PmaxFit:
    """Weighted least-squares fit of the sin^2 law to depletion data.

    One free parameter (the full-conversion power). Damped Gauss-Newton
    with the analytic derivative; converged when the accepted step is
    below 1e-10 relative. Weights are 1/sigma^2 when every sample
    carries an uncertainty, unit otherwise (then the reported
    uncertainty is scaled by the residual variance). The uncertainty
    comes from the local quadratic approximation of the cost at the
    optimum.

    Raises ValueError for degenerate data and FitError (carrying the
    last iterate) when the iteration does not converge.
    """
    if len(samples) < 3:
        raise ValueError("need at least 3 depletion samples")
    powers = np.array([s.circulating_power for s in samples], dtype=float)
    etas = np.array([s.measured_internal_efficiency for s in samples], dtype=float)
    if np.unique(powers).size < 2:
        raise ValueError("degenerate depletion data: all powers equal")

    sigmas = [s.efficiency_uncertainty for s in samples]
    weighted = all(s is not None for s in sigmas)
    w = (np.array([1.0 / s ** 2 for s in sigmas]) if weighted
         else np.ones_like(powers))

    # Initial guess: invert the law at each informative sample.
    cand = []
    for p, e in zip(powers, etas):
        if p > 0 and 0 < e <= 1:
            cand.append(p / (2.0 / np.pi * np.arcsin(np.sqrt(e))) ** 2)
    p_full = float(np.median(cand)) if cand else 4.0 * float(powers.max())

    def cost(p):
        model, _ = _efficiency_model_and_grad(powers, p)
        return float(np.sum(w * (etas - model) ** 2))

    current = cost(p_full)
    converged = False
    for _ in range(200):
        model, grad = _efficiency_model_and_grad(powers, p_full)
        r = etas - model
        jtj = float(np.sum(w * grad * grad))
        if jtj == 0.0:
            raise FitError("flat model: no gradient information",
                           last_iterate=p_full)
        step = float(np.sum(w * grad * r)) / jtj
        # Damp: halve until the cost actually decreases.
        t = 1.0
        while t > 1e-12:
            trial = p_full + t * step
            if trial > 0 and cost(trial) <= current:
                break
            t *= 0.5
        else:
            converged = True  # no downhill direction left
            break
        p_full = p_full + t * step
        current = cost(p_full)
        if abs(t * step) < 1e-10 * abs(p_full):
            converged = True
            break
    if not converged:
        raise FitError("Gauss-Newton did not converge in 200 iterations",
                       last_iterate=p_full, iterations=200)

    _, grad = _efficiency_model_and_grad(powers, p_full)
    jtj = float(np.sum(w * grad * grad))
    if weighted:
        var = 1.0 / jtj
    else:
        dof = max(len(samples) - 1, 1)
        var = current / dof / jtj
    return PmaxFit(p_max=float(p_full), uncertainty=float(np.sqrt(var)),
                   residual_norm=float(np.sqrt(current)))
