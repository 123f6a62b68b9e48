"""Photon-statistics verification: g2, Franson fringes, chained Bell tests.

Estimators and synthetic-data generators for the quantum verification
chain of a frequency-converted single-photon link:

- normalized signal-idler cross-correlation g2 from a coincidence
  histogram, with a Cauchy-Schwarz significance test;
- Franson fringe model, weighted visibility fits, and flat-pedestal
  accidental correction;
- chained CHSH machinery: closed-form bounds, optimal phase schedules,
  the signed 2N-term sum, two-detector port completion;
- a Poissonian Monte-Carlo simulator of the counting experiments,
  deterministic for a fixed seed.

Rates in Hz, times in seconds, phases in radians. Uncertainties are
1-sigma and propagate to first order (delta method) assuming Poisson
counting statistics; multi-trial averages use the trial spread when
at least 3 trials are available.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "CoincidenceHistogram",
    "FransonPoint",
    "FransonScan",
    "FransonFit",
    "PortRates",
    "BellTerm",
    "BellSchedule",
    "BellSimulation",
    "FRANSON_PORTS",
    "normalize_g2",
    "cauchy_schwarz_significance",
    "franson_fringe",
    "fit_visibility",
    "correct_visibility",
    "expectation_from_rates",
    "expectation_from_pair",
    "two_detector_completion",
    "chained_bounds",
    "optimal_schedule",
    "model_expectations",
    "chained_bell_value",
    "simulate_franson_scan",
    "simulate_bell_trials",
]

#: Coincidence port labels: detector outcome pairs (+/-) on the two sides.
FRANSON_PORTS = ("++", "+-", "-+", "--")

#: Ports whose fringe is in phase with the ++ port. The cross ports
#: fringe with the opposite sign of the cosine.
_EVEN_PORTS = frozenset({"++", "--"})


@dataclass
class CoincidenceHistogram:
    """Binned two-detector delay histogram.

    bin_width [s]; counts: nonnegative integers per delay bin;
    integration_time [s]; center_bin_index: index of the zero-delay bin.
    """

    bin_width: float
    counts: np.ndarray
    integration_time: float
    center_bin_index: int

    def __post_init__(self):
        if not self.bin_width > 0:
            raise ValueError("bin_width must be positive")
        if not self.integration_time > 0:
            raise ValueError("integration_time must be positive")
        self.counts = np.asarray(self.counts)
        if self.counts.ndim != 1 or self.counts.size == 0:
            raise ValueError("counts must be a nonempty 1-D array")
        if np.any(self.counts < 0):
            raise ValueError("counts must be nonnegative")
        if not np.all(np.equal(np.mod(self.counts, 1), 0)):
            raise ValueError("counts must be integers")
        if not 0 <= self.center_bin_index < self.counts.size:
            raise ValueError("center_bin_index out of range")


@dataclass
class FransonPoint:
    """One scan point: summed interferometer phase, port, counts, time."""

    phase: float
    port: str
    counts: float
    time_s: float

    def __post_init__(self):
        if self.port not in FRANSON_PORTS:
            raise ValueError(f"unknown port {self.port!r}")
        if self.counts < 0:
            raise ValueError("counts must be nonnegative")
        if not self.time_s > 0:
            raise ValueError("integration time must be positive")


@dataclass
class FransonScan:
    """Collection of Franson scan points, possibly multi-port."""

    points: list[FransonPoint] = field(default_factory=list)

    def ports(self) -> list[str]:
        seen = []
        for p in self.points:
            if p.port not in seen:
                seen.append(p.port)
        return seen

    def select(self, port: str) -> list[FransonPoint]:
        return [p for p in self.points if p.port == port]


@dataclass
class PortRates:
    """Coincidence rates [Hz] of the four outcome ports, with 1-sigma errors."""

    r_pp: float
    r_pm: float
    r_mp: float
    r_mm: float
    sigma_pp: float = 0.0
    sigma_pm: float = 0.0
    sigma_mp: float = 0.0
    sigma_mm: float = 0.0

    def __post_init__(self):
        if min(self.r_pp, self.r_pm, self.r_mp, self.r_mm) < 0:
            raise ValueError("rates must be nonnegative")
        if min(self.sigma_pp, self.sigma_pm, self.sigma_mp, self.sigma_mm) < 0:
            raise ValueError("uncertainties must be nonnegative")


def normalize_g2(hist: CoincidenceHistogram, peak_window_bins: int = 1,
                 background_exclusion_bins: int = 10,
                 mask_bins: tuple[int, ...] = ()) -> tuple[float, float]:
    """Normalized cross-correlation peak of a coincidence histogram.

    The accidental (uncorrelated) level is the mean of all bins farther
    than `background_exclusion_bins` from the center bin; `mask_bins`
    removes additional bins from the background (e.g. electronic
    reflection sidelobes). The peak is the mean of `peak_window_bins`
    bins centered on the center bin. Returns (g2, sigma) with sigma
    from Poisson propagation of both the peak and background sums.
    """
    counts = hist.counts.astype(float)
    n = counts.size
    center = hist.center_bin_index
    if peak_window_bins < 1:
        raise ValueError("peak_window_bins must be >= 1")
    if background_exclusion_bins < 0:
        raise ValueError("background_exclusion_bins must be >= 0")

    start = center - (peak_window_bins - 1) // 2
    stop = start + peak_window_bins
    if start < 0 or stop > n:
        raise ValueError("peak window extends beyond the histogram")

    idx = np.arange(n)
    background = np.abs(idx - center) > background_exclusion_bins
    background[list(mask_bins)] = False
    m = int(np.count_nonzero(background))
    if m < 10 * background_exclusion_bins:
        raise ValueError(
            f"insufficient background: {m} bins outside the exclusion zone, "
            f"need >= {10 * background_exclusion_bins}")

    peak_sum = float(counts[start:stop].sum())
    bg_sum = float(counts[background].sum())
    if bg_sum == 0.0:
        raise ValueError("zero accidental level: cannot normalize")

    w = float(peak_window_bins)
    g2 = (peak_sum / w) / (bg_sum / m)
    # Poisson: var(peak_sum) = peak_sum, var(bg_sum) = bg_sum.
    d_peak = m / (w * bg_sum)
    d_bg = peak_sum * m / (w * bg_sum ** 2)
    sigma = math.sqrt(d_peak ** 2 * peak_sum + d_bg ** 2 * bg_sum)
    return g2, sigma


def cauchy_schwarz_significance(g2_si: float, sigma: float,
                                classical_bound: float = 2.0) -> float:
    """Standard deviations by which g2_si exceeds the classical bound.

    The default bound of 2 corresponds to thermal marginal
    autocorrelations (g_ss = g_ii = 2); pass another bound to use a
    different classical model.
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    return (g2_si - classical_bound) / sigma


def franson_fringe(phase_sum: float, amplitude: float, visibility: float,
                   phase_offset: float = 0.0) -> float:
    """Franson coincidence rate model [Hz].

    (amplitude/2) * (1 + visibility * cos(phase_sum + phase_offset)):
    the cos^2 fringe written with an explicit visibility. The maximum
    over phase is amplitude * (1 + visibility)/2, i.e. `amplitude`
    itself at unit visibility.
    """
    if not 0.0 <= visibility <= 1.0:
        raise ValueError("visibility must lie in [0, 1]")
    if amplitude < 0:
        raise ValueError("amplitude must be nonnegative")
    return 0.5 * amplitude * (1.0 + visibility * math.cos(phase_sum + phase_offset))


@dataclass
class FransonFit:
    """Fitted fringe parameters with 1-sigma uncertainties."""

    visibility: float
    phase_offset: float
    amplitude: float
    sigma_visibility: float
    sigma_phase_offset: float
    sigma_amplitude: float
    mean_rate: float


def fit_visibility(scan: FransonScan, port: str = "++") -> FransonFit:
    """Weighted least-squares fit of the fringe model to one port.

    The model (A/2)(1 + V cos(phi + delta)) is linear in the
    parameters (p0, p1, p2) = (A/2, A V cos(delta)/2, -A V sin(delta)/2)
    of p0 + p1 cos(phi) + p2 sin(phi), so the weighted fit is solved
    exactly by the normal equations; weights are inverse Poisson
    variances of the rates. Uncertainties come from the local
    curvature (the parameter covariance), propagated through the
    reparameterization.

    Requires at least 4 distinct phases spanning more than pi.
    """
    pts = scan.select(port)
    if not pts:
        raise ValueError(f"scan has no points for port {port!r}")
    phases = np.array([p.phase for p in pts])
    counts = np.array([p.counts for p in pts], dtype=float)
    times = np.array([p.time_s for p in pts])

    distinct = np.unique(phases)
    if distinct.size < 4:
        raise ValueError("need at least 4 distinct phases")
    if distinct.max() - distinct.min() <= math.pi:
        raise ValueError("phase span too small: must exceed pi")

    rates = counts / times
    # var(rate) = counts / time^2; floor the counts to keep zero bins finite
    weights = times ** 2 / np.maximum(counts, 1.0)
    x = np.column_stack([np.ones_like(phases), np.cos(phases), np.sin(phases)])
    xtw = x.T * weights
    normal = xtw @ x
    try:
        cov = np.linalg.inv(normal)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"degenerate phase design: {exc}") from exc
    p = cov @ (xtw @ rates)

    p0, p1, p2 = (float(v) for v in p)
    if p0 <= 0:
        raise ValueError("fitted mean rate is not positive; no usable signal")
    r = math.hypot(p1, p2)
    visibility = r / p0
    offset = math.atan2(-p2, p1)
    amplitude = 2.0 * p0

    if r > 0:
        g_v = np.array([-visibility / p0, p1 / (p0 * r), p2 / (p0 * r)])
        g_d = np.array([0.0, p2 / r ** 2, -p1 / r ** 2])
        sigma_v = math.sqrt(max(g_v @ cov @ g_v, 0.0))
        sigma_d = math.sqrt(max(g_d @ cov @ g_d, 0.0))
    else:
        # Flat fringe: |.| is not differentiable at 0; quote the raw
        # scatter of the quadrature components instead.
        sigma_v = math.sqrt(max(cov[1, 1], cov[2, 2])) / p0
        sigma_d = math.pi  # offset is meaningless at V = 0
    sigma_a = 2.0 * math.sqrt(max(cov[0, 0], 0.0))
    return FransonFit(visibility=visibility, phase_offset=offset,
                      amplitude=amplitude, sigma_visibility=sigma_v,
                      sigma_phase_offset=sigma_d, sigma_amplitude=sigma_a,
                      mean_rate=p0)


def correct_visibility(raw_visibility: float, raw_amplitude: float,
                       accidental_rate: float) -> float:
    """Visibility after subtracting a flat accidental pedestal.

    Removing a constant rate `a` from the fitted fringe rescales the
    contrast about the mean rate m = amplitude/2:

        V_corr = V_raw * m / (m - a).

    Monotone increasing in the accidental rate; equal to the raw
    visibility at a = 0. Requires a < m.
    """
    if not 0.0 <= raw_visibility <= 1.0:
        raise ValueError("raw visibility must lie in [0, 1]")
    if not raw_amplitude > 0:
        raise ValueError("raw amplitude must be positive")
    if accidental_rate < 0:
        raise ValueError("accidental rate must be nonnegative")
    mean_rate = 0.5 * raw_amplitude
    if accidental_rate >= mean_rate:
        raise ValueError(
            f"accidental rate {accidental_rate} >= mean rate {mean_rate}: "
            "nothing left after subtraction")
    return raw_visibility * mean_rate / (mean_rate - accidental_rate)


def expectation_from_rates(rates: PortRates) -> tuple[float, float]:
    """Correlation estimator E from the four coincidence ports.

    E = (R++ - R+- - R-+ + R--) / (R++ + R+- + R-+ + R--), with
    first-order Poisson propagation of the stated port uncertainties
    (treated as independent; for two-detector data reconstructed via
    two_detector_completion the duplicated ports are correlated, so
    prefer expectation_from_pair there).
    """
    total = rates.r_pp + rates.r_pm + rates.r_mp + rates.r_mm
    if not total > 0:
        raise ValueError("total rate must be positive")
    e = (rates.r_pp - rates.r_pm - rates.r_mp + rates.r_mm) / total
    d_same = (1.0 - e) / total   # dE/dR for the ++ and -- ports
    d_cross = (1.0 + e) / total  # -dE/dR for the +- and -+ ports
    var = (d_same ** 2 * (rates.sigma_pp ** 2 + rates.sigma_mm ** 2)
           + d_cross ** 2 * (rates.sigma_pm ** 2 + rates.sigma_mp ** 2))
    return e, math.sqrt(var)


def expectation_from_pair(r_plus: float, r_minus: float,
                          sigma_plus: float = 0.0, sigma_minus: float = 0.0
                          ) -> tuple[float, float]:
    """Correlation from one two-detector setting pair.

    E = (R+ - R-) / (R+ + R-) where R+ is the ++ coincidence rate at
    the set phase and R- the same rate with one phase shifted by pi.
    Uncertainty by the delta method on the two (independent) inputs.
    """
    total = r_plus + r_minus
    if not total > 0:
        raise ValueError("total rate must be positive")
    e = (r_plus - r_minus) / total
    var = ((2.0 * r_minus / total ** 2) ** 2 * sigma_plus ** 2
           + (2.0 * r_plus / total ** 2) ** 2 * sigma_minus ** 2)
    return e, math.sqrt(var)


def two_detector_completion(r_pp_at_phase: float, r_pp_at_phase_plus_pi: float,
                            sigma_at_phase: float = 0.0,
                            sigma_at_phase_plus_pi: float = 0.0) -> PortRates:
    """Reconstruct four ports from two-detector measurements.

    Under the symmetry assumptions R-- = R++ and R+- = R-+ =
    R++(phase + pi), two measurements determine all four ports. The
    duplicated entries share their measurement uncertainty (they are
    the same number, not independent samples).
    """
    if r_pp_at_phase < 0 or r_pp_at_phase_plus_pi < 0:
        raise ValueError("rates must be nonnegative")
    return PortRates(
        r_pp=r_pp_at_phase, r_pm=r_pp_at_phase_plus_pi,
        r_mp=r_pp_at_phase_plus_pi, r_mm=r_pp_at_phase,
        sigma_pp=sigma_at_phase, sigma_pm=sigma_at_phase_plus_pi,
        sigma_mp=sigma_at_phase_plus_pi, sigma_mm=sigma_at_phase,
    )


def chained_bounds(n: int) -> tuple[float, float, float]:
    """Closed-form bounds of the N-setting chained CHSH inequality.

    Returns (S_LHV, S_QM, V_crit): the local deterministic bound
    2N - 1, the quantum maximum 2N cos(pi/2N), and the critical fringe
    visibility S_LHV / S_QM above which the quantum value violates the
    local bound.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    s_lhv = 2.0 * n - 1.0
    s_qm = 2.0 * n * math.cos(math.pi / (2.0 * n))
    return s_lhv, s_qm, s_lhv / s_qm


@dataclass
class BellTerm:
    """One signed correlation term <A_j B_k> (0-based indices)."""

    a_index: int
    b_index: int
    sign: int

    def __post_init__(self):
        if self.sign not in (-1, 1):
            raise ValueError("sign must be -1 or +1")


def _canonical_terms(n: int) -> list[BellTerm]:
    terms = [BellTerm(n - 1, n - 1, +1)]
    for k in range(1, n):
        terms.append(BellTerm(k, k - 1, +1))
        terms.append(BellTerm(k - 1, k, +1))
    terms.append(BellTerm(0, 0, -1))
    return terms


@dataclass
class BellSchedule:
    """Phase settings and term bookkeeping of the 2N-term chained sum.

    The signed sum is <A_N B_N> + sum_{k=2..N} (<A_k B_{k-1}> +
    <A_{k-1} B_k>) - <A_1 B_1>; `terms` must carry exactly that
    pattern (0-based indices). `expectations` and `sigmas`, when
    present, hold one value per term in the same order.
    """

    n: int
    alice_phases: np.ndarray
    bob_phases: np.ndarray
    terms: list[BellTerm]
    expectations: np.ndarray | None = None
    sigmas: np.ndarray | None = None

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("need n >= 2")
        self.alice_phases = np.asarray(self.alice_phases, dtype=float)
        self.bob_phases = np.asarray(self.bob_phases, dtype=float)
        if self.alice_phases.shape != (self.n,) or self.bob_phases.shape != (self.n,):
            raise ValueError("need exactly n phases per side")
        expected = {(t.a_index, t.b_index, t.sign) for t in _canonical_terms(self.n)}
        actual = {(t.a_index, t.b_index, t.sign) for t in self.terms}
        if len(self.terms) != 2 * self.n or actual != expected:
            raise ValueError("terms do not follow the chained 2N-term sign pattern")
        for name in ("expectations", "sigmas"):
            v = getattr(self, name)
            if v is not None:
                v = np.asarray(v, dtype=float)
                if v.shape != (2 * self.n,):
                    raise ValueError(f"{name} must have one entry per term")
                setattr(self, name, v)

    def term_phase(self, term: BellTerm) -> float:
        """Summed interferometer phase probed by one term."""
        return float(self.alice_phases[term.a_index] + self.bob_phases[term.b_index])


def optimal_schedule(n: int) -> BellSchedule:
    """Phase settings maximizing the chained sum at a given N.

    Every term probes a summed phase of magnitude pi/2N except the
    subtracted <A_1 B_1> term, which sits at (2N-1) pi/2N; with ideal
    unit-visibility fringes the schedule reaches S = 2N cos(pi/2N).
    The absolute offset is conventional: a_1 = 0.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    delta = math.pi / (2.0 * n)
    # Same settings on both sides, alternating about zero; consecutive
    # sums step by delta, the (1,1) self-sum lands at (2N-1) delta.
    f = np.array([(-1) ** j * (n - j + 0.5) * delta for j in range(1, n + 1)])
    alice = f - f[0]
    bob = f + f[0]
    return BellSchedule(n=n, alice_phases=alice, bob_phases=bob,
                        terms=_canonical_terms(n))


def model_expectations(schedule: BellSchedule, visibility: float) -> BellSchedule:
    """Fill a schedule with ideal fringe-model expectations V cos(a+b)."""
    if not 0.0 <= visibility <= 1.0:
        raise ValueError("visibility must lie in [0, 1]")
    e = np.array([visibility * math.cos(schedule.term_phase(t))
                  for t in schedule.terms])
    return replace(schedule, expectations=e, sigmas=np.zeros_like(e))


def chained_bell_value(schedule: BellSchedule) -> tuple[float, float]:
    """Signed 2N-term sum and its uncertainty (quadrature of terms)."""
    if schedule.expectations is None or schedule.sigmas is None:
        raise ValueError("schedule has no expectations/uncertainties to sum")
    if not (np.all(np.isfinite(schedule.expectations))
            and np.all(np.isfinite(schedule.sigmas))):
        raise ValueError("schedule expectations/uncertainties are incomplete")
    signs = np.array([t.sign for t in schedule.terms], dtype=float)
    s = float(np.sum(signs * schedule.expectations))
    sigma = float(np.sqrt(np.sum(schedule.sigmas ** 2)))
    return s, sigma


def _spawn_generators(seed: int, count: int) -> list[np.random.Generator]:
    """Documented seed-mixing rule: SeedSequence(seed).spawn per trial."""
    return [np.random.Generator(np.random.PCG64(s))
            for s in np.random.SeedSequence(seed).spawn(count)]


def simulate_franson_scan(phases, amplitude: float, visibility,
                          phase_offset: float = 0.0,
                          accidental_rate: float = 0.0,
                          integration_time: float = 1.0,
                          seed: int = 0,
                          ports: tuple[str, ...] = FRANSON_PORTS,
                          exact: bool = False) -> FransonScan:
    """Poisson-sample a multi-port Franson phase scan.

    `visibility` is a single number or a {port: visibility} map. The
    cross ports (+-, -+) fringe with the opposite cosine sign. With
    `exact=True` the expected counts are returned without sampling
    (the infinite-statistics limit). Deterministic for a fixed seed.
    """
    if accidental_rate < 0 or not integration_time > 0:
        raise ValueError("need accidental_rate >= 0 and integration_time > 0")
    vis = (dict(visibility) if isinstance(visibility, dict)
           else {port: float(visibility) for port in ports})
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    points = []
    for port in ports:
        v = vis[port]
        flip = 0.0 if port in _EVEN_PORTS else math.pi
        for phi in phases:
            rate = franson_fringe(phi, amplitude, v, phase_offset + flip) \
                + accidental_rate
            mean = rate * integration_time
            counts = mean if exact else float(rng.poisson(mean))
            points.append(FransonPoint(phase=float(phi), port=port,
                                       counts=counts, time_s=integration_time))
    return FransonScan(points=points)


@dataclass
class BellSimulation:
    """Counts and per-trial results of a simulated chained Bell run.

    counts[t, i, 0] and counts[t, i, 1] are the ++ coincidence counts
    of trial t, term i at the term's phase and at phase + pi.
    """

    schedule: BellSchedule
    counts: np.ndarray
    s_values: np.ndarray
    s_sigmas: np.ndarray
    mean_s: float
    sigma_mean_s: float


def simulate_bell_trials(schedule: BellSchedule, visibility: float,
                         amplitude: float, accidental_rate: float = 0.0,
                         integration_time: float = 1.0, trials: int = 1,
                         seed: int = 0, exact: bool = False) -> BellSimulation:
    """Monte-Carlo chained Bell runs with the two-detector protocol.

    Each term of each trial is measured twice (at its phase and at
    phase + pi); counts are Poisson with the fringe-model rate plus
    accidentals. Per-trial S values come from the pair estimator; the
    cross-trial mean uses the trial spread for its uncertainty when at
    least 3 trials are available, the propagated per-trial sigma
    otherwise. `exact=True` replaces the Poisson draws by their means
    (with zero accidentals this returns S = V * S_QM exactly).
    Deterministic for a fixed seed: trial t uses the t-th child of
    SeedSequence(seed).
    """
    if trials < 1:
        raise ValueError("need at least 1 trial")
    if amplitude < 0 or accidental_rate < 0 or not integration_time > 0:
        raise ValueError("nonnegative rates and positive time required")
    if not 0.0 <= visibility <= 1.0:
        raise ValueError("visibility must lie in [0, 1]")

    n_terms = len(schedule.terms)
    generators = None if exact else _spawn_generators(seed, trials)
    counts = np.empty((trials, n_terms, 2))
    s_values = np.empty(trials)
    s_sigmas = np.empty(trials)
    for t in range(trials):
        expectations = np.empty(n_terms)
        sigmas = np.empty(n_terms)
        for i, term in enumerate(schedule.terms):
            theta = schedule.term_phase(term)
            mean_plus = (franson_fringe(theta, amplitude, visibility)
                         + accidental_rate) * integration_time
            mean_minus = (franson_fringe(theta + math.pi, amplitude, visibility)
                          + accidental_rate) * integration_time
            if exact:
                n_plus, n_minus = mean_plus, mean_minus
            else:
                n_plus = float(generators[t].poisson(mean_plus))
                n_minus = float(generators[t].poisson(mean_minus))
            counts[t, i] = (n_plus, n_minus)
            expectations[i], sigmas[i] = expectation_from_pair(
                n_plus, n_minus, math.sqrt(n_plus), math.sqrt(n_minus))
        filled = replace(schedule, expectations=expectations, sigmas=sigmas)
        s_values[t], s_sigmas[t] = chained_bell_value(filled)

    mean_s = float(s_values.mean())
    if trials >= 3:
        sigma_mean = float(s_values.std(ddof=1) / math.sqrt(trials))
    else:
        sigma_mean = float(np.sqrt(np.sum(s_sigmas ** 2)) / trials)
    return BellSimulation(schedule=schedule, counts=counts, s_values=s_values,
                          s_sigmas=s_sigmas, mean_s=mean_s,
                          sigma_mean_s=sigma_mean)
