"""Noise spectral density accounting and fiber-link SNR budgets.

Covers the collection-efficiency chain, generated (in-crystal) noise
spectral density from detected rates, the linear noise-vs-power fit,
the converter noise rate behind a narrowband filter, and the
SNR-versus-distance link model

    SNR(x) = eta_ext * R_src * T(x) / (N_C * T(x) + N_D),
    T(x) = exp(-alpha * x),  alpha = attenuation[dB/km] * ln(10) / 10.

Units in this module follow presentation conventions rather than pure
SI: distances in km, attenuation in dB/km (stored positive; decay is
applied in the exponent), spectral densities in Hz/nm, filter widths
in nm, rates in Hz.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "EfficiencyChain",
    "NoiseMeasurement",
    "LinkBudget",
    "SnrSweep",
    "chain_product",
    "generated_nsd",
    "fit_noise_slope",
    "converter_noise_rate",
    "snr_at_distance",
    "distance_for_snr",
    "snr_sweep",
]

_DISTANCE_TOL_KM = 1e-6


@dataclass
class EfficiencyChain:
    """Ordered list of (label, transmission) factors, each in (0, 1]."""

    entries: list[tuple[str, float]] = field(default_factory=list)

    def __post_init__(self):
        for label, factor in self.entries:
            if not 0.0 < factor <= 1.0:
                raise ValueError(f"chain factor {label!r}={factor} outside (0, 1]")

    def labels(self) -> list[str]:
        return [label for label, _ in self.entries]


@dataclass
class NoiseMeasurement:
    """Detected noise rate at one circulating pump power.

    circulating_power [W]; measured_rate [Hz] after the collection
    chain and detector; collection_bandwidth [nm] of the measurement
    (FWHM of the collecting filter stack).
    """

    circulating_power: float
    measured_rate: float
    collection_bandwidth: float

    def __post_init__(self):
        if self.circulating_power < 0 or self.measured_rate < 0:
            raise ValueError("power and rate must be nonnegative")
        if not self.collection_bandwidth > 0:
            raise ValueError("collection_bandwidth must be positive")


@dataclass
class LinkBudget:
    """Everything the SNR-vs-distance model consumes.

    eta_ext: distance-independent efficiency product applied to the
    signal. source_rate [Hz]: photon rate entering the link.
    converter_noise [Hz]: detected converter noise rate co-propagating
    with the signal (attenuates with distance like the signal).
    dark_rate [Hz]: detector dark counts (distance independent).
    attenuation [dB/km], stored positive. narrowband_filter_width [nm]
    and narrowband_filter_transmission describe the final filter and
    are used when deriving converter_noise from a spectral density.
    """

    eta_ext: float
    source_rate: float
    converter_noise: float
    dark_rate: float
    attenuation: float
    narrowband_filter_width: float
    narrowband_filter_transmission: float

    def __post_init__(self):
        if not 0.0 < self.eta_ext <= 1.0:
            raise ValueError("eta_ext must lie in (0, 1]")
        if self.source_rate < 0 or self.converter_noise < 0 or self.dark_rate < 0:
            raise ValueError("rates must be nonnegative")
        if not self.attenuation > 0:
            raise ValueError("attenuation must be positive (dB/km, decay applied in the model)")
        if not self.narrowband_filter_width > 0:
            raise ValueError("narrowband_filter_width must be positive")
        if not 0.0 < self.narrowband_filter_transmission <= 1.0:
            raise ValueError("narrowband_filter_transmission must lie in (0, 1]")


def chain_product(chain: EfficiencyChain) -> float:
    """Product of all chain factors; 1.0 for an empty chain."""
    out = 1.0
    for _, factor in chain.entries:
        out *= factor
    return out


def generated_nsd(meas: NoiseMeasurement, eta_col: float, eta_det: float) -> float:
    """In-crystal noise spectral density [Hz/nm] from a detected rate.

    NSD_gen = N_meas / (delta_lambda * eta_col * eta_det): undo the
    collection chain and detector efficiency, normalize to bandwidth.
    """
    if not 0.0 < eta_col <= 1.0 or not 0.0 < eta_det <= 1.0:
        raise ValueError("efficiencies must lie in (0, 1]")
    return meas.measured_rate / (meas.collection_bandwidth * eta_col * eta_det)


def fit_noise_slope(points: list[tuple[float, float]]) -> tuple[float, float]:
    """Ordinary least squares line through (power [W], NSD [Hz/nm]) points.

    Returns (slope [Hz/(nm W)], intercept [Hz/nm]).
    """
    if len(points) < 2:
        raise ValueError("need at least 2 points")
    x = np.array([p for p, _ in points], dtype=float)
    y = np.array([v for _, v in points], dtype=float)
    if np.all(x == x[0]):
        raise ValueError("degenerate abscissae: all powers equal")
    xm, ym = x.mean(), y.mean()
    slope = float(np.sum((x - xm) * (y - ym)) / np.sum((x - xm) ** 2))
    return slope, float(ym - slope * xm)


def converter_noise_rate(nsd_ext: float, budget: LinkBudget,
                         detector_efficiency: float = 0.9) -> float:
    """Detected converter noise rate [Hz] behind the narrowband filter.

    N_C = NSD_ext * filter_width * filter_transmission * detector
    efficiency. The factors applied to the noise mirror the ones the
    signal sees in eta_ext.
    """
    if nsd_ext < 0:
        raise ValueError("nsd_ext must be nonnegative")
    if not 0.0 < detector_efficiency <= 1.0:
        raise ValueError("detector_efficiency must lie in (0, 1]")
    return (nsd_ext * budget.narrowband_filter_width
            * budget.narrowband_filter_transmission * detector_efficiency)


def _alpha_per_km(budget: LinkBudget) -> float:
    return budget.attenuation * math.log(10.0) / 10.0


def snr_at_distance(budget: LinkBudget, x: float) -> float:
    """SNR of the link after x km of fiber.

    Signal and converter noise share the fiber transmittance; dark
    counts do not. Returns inf when both noise rates are zero.
    """
    if x < 0:
        raise ValueError("distance must be nonnegative")
    t = math.exp(-_alpha_per_km(budget) * x)
    signal = budget.eta_ext * budget.source_rate * t
    noise = budget.converter_noise * t + budget.dark_rate
    if noise == 0.0:
        return math.inf
    return signal / noise


def distance_for_snr(budget: LinkBudget, threshold: float) -> float:
    """Distance [km] at which the SNR decays to `threshold`.

    Solved by bisection to 1e-6 km. Requires dark counts > 0 (otherwise
    the SNR is constant in distance) and a threshold attainable at
    x = 0. The closed form

        x = (10 / alpha_dB) * log10((eta_ext R_src - thr N_C) / (thr N_D))

    is what the bisection converges to; tests cross-check the two.
    """
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    if budget.dark_rate == 0.0:
        raise ValueError("SNR does not decay without dark counts; no unique distance")
    snr0 = snr_at_distance(budget, 0.0)
    if snr0 < threshold:
        raise ValueError(f"threshold {threshold} not attainable: SNR(0) = {snr0}")
    lo, hi = 0.0, 1.0
    while snr_at_distance(budget, hi) > threshold:
        lo, hi = hi, 2.0 * hi
        if hi > 1e9:  # pragma: no cover - unreachable for valid budgets
            raise ValueError("no finite crossing found")
    while hi - lo > _DISTANCE_TOL_KM:
        mid = 0.5 * (lo + hi)
        if snr_at_distance(budget, mid) > threshold:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass
class SnrSweep:
    """SNR of several named budgets over a common distance grid.

    values[i, j] is the SNR of budget j at distances_km[i]. Column
    order follows the input budget order.
    """

    names: list[str]
    distances_km: np.ndarray
    values: np.ndarray

    def column_header(self) -> list[str]:
        return ["distance_km"] + [f"snr_{name}" for name in self.names]

    def ratio(self, name_a: str, name_b: str) -> np.ndarray:
        """Elementwise SNR ratio of budget a over budget b."""
        ia, ib = self.names.index(name_a), self.names.index(name_b)
        return self.values[:, ia] / self.values[:, ib]


def snr_sweep(budgets: list[tuple[str, LinkBudget]],
              x_grid_km: list[float] | np.ndarray) -> SnrSweep:
    """Evaluate every budget's SNR on a shared distance grid."""
    if len(budgets) == 0:
        raise ValueError("need at least one budget")
    grid = np.asarray(x_grid_km, dtype=float)
    if grid.size == 0:
        raise ValueError("distance grid is empty")
    if np.any(grid < 0):
        raise ValueError("distances must be nonnegative")
    values = np.empty((grid.size, len(budgets)))
    for j, (_, budget) in enumerate(budgets):
        for i, x in enumerate(grid):
            values[i, j] = snr_at_distance(budget, float(x))
    return SnrSweep(names=[name for name, _ in budgets],
                    distances_km=grid, values=values)
