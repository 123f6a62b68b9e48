import math

import numpy as np
import pytest

from qfc_link.link import (
    EfficiencyChain,
    LinkBudget,
    NoiseMeasurement,
    chain_product,
    converter_noise_rate,
    distance_for_snr,
    fit_noise_slope,
    generated_nsd,
    snr_at_distance,
    snr_sweep,
)

DEVICE_CHAIN = EfficiencyChain(entries=[
    ("fiber_coupling", 0.72), ("optics", 0.99),
    ("bandpass", 0.92), ("grating", 0.70),
])


def budget(**overrides):
    kw = dict(eta_ext=0.15, source_rate=24e3, converter_noise=0.0,
              dark_rate=1.0, attenuation=0.17,
              narrowband_filter_width=0.005,
              narrowband_filter_transmission=0.5)
    kw.update(overrides)
    return LinkBudget(**kw)


def closed_form_distance(b, threshold):
    return (10.0 / b.attenuation) * math.log10(
        (b.eta_ext * b.source_rate - threshold * b.converter_noise)
        / (threshold * b.dark_rate))


class TestChain:
    def test_device_chain_product(self):
        assert chain_product(DEVICE_CHAIN) == pytest.approx(0.459, abs=1e-3)

    def test_empty_chain(self):
        assert chain_product(EfficiencyChain()) == 1.0

    def test_append_factor(self):
        extended = EfficiencyChain(entries=DEVICE_CHAIN.entries + [("extra", 0.5)])
        assert chain_product(extended) \
            == pytest.approx(0.5 * chain_product(DEVICE_CHAIN), rel=1e-12)

    def test_external_efficiency_consistency(self):
        assert 0.723 * chain_product(DEVICE_CHAIN) == pytest.approx(0.332, abs=0.005)

    def test_factor_range(self):
        with pytest.raises(ValueError):
            EfficiencyChain(entries=[("bad", 1.2)])


class TestGeneratedNsd:
    def test_measured_rate_example(self):
        meas = NoiseMeasurement(circulating_power=74.5, measured_rate=39.6e3,
                                collection_bandwidth=0.87)
        nsd = generated_nsd(meas, eta_col=0.459, eta_det=0.9)
        assert nsd == pytest.approx(110e3, rel=0.01)

    def test_zero_rate(self):
        meas = NoiseMeasurement(74.5, 0.0, 0.87)
        assert generated_nsd(meas, 0.459, 0.9) == 0.0

    def test_homogeneity(self):
        meas = NoiseMeasurement(74.5, 1000.0, 0.87)
        base = generated_nsd(meas, 0.5, 0.9)
        assert generated_nsd(NoiseMeasurement(74.5, 2000.0, 0.87), 0.5, 0.9) \
            == pytest.approx(2 * base, rel=1e-12)
        assert generated_nsd(meas, 0.25, 0.9) == pytest.approx(2 * base, rel=1e-12)
        assert generated_nsd(NoiseMeasurement(74.5, 1000.0, 1.74), 0.5, 0.9) \
            == pytest.approx(base / 2, rel=1e-12)


class TestNoiseSlope:
    def test_synthetic_line(self):
        powers = np.linspace(5.0, 74.5, 12)
        points = [(p, 1.48e3 * p) for p in powers]
        slope, intercept = fit_noise_slope(points)
        assert slope == pytest.approx(1.48e3, rel=1e-9)
        assert intercept == pytest.approx(0.0, abs=1e-6)
        assert slope * 74.5 == pytest.approx(110.3e3, rel=2e-3)

    def test_two_points(self):
        slope, intercept = fit_noise_slope([(0.0, 0.0), (1.0, 1.0)])
        assert slope == pytest.approx(1.0)
        assert intercept == pytest.approx(0.0, abs=1e-12)

    def test_constant_data(self):
        slope, _ = fit_noise_slope([(1.0, 5.0), (2.0, 5.0), (3.0, 5.0)])
        assert slope == pytest.approx(0.0, abs=1e-12)

    def test_degenerate_abscissae(self):
        with pytest.raises(ValueError):
            fit_noise_slope([(1.0, 2.0), (1.0, 3.0)])


class TestConverterNoise:
    def test_narrowband_filter_example(self):
        rate = converter_noise_rate(45e3, budget())
        assert rate == pytest.approx(101.25, rel=1e-12)
        assert rate == pytest.approx(101.0, abs=0.5)

    def test_ppln_comparison(self):
        assert converter_noise_rate(5 * 45e3, budget()) \
            == pytest.approx(506.25, rel=1e-12)

    def test_noiseless(self):
        assert converter_noise_rate(0.0, budget()) == 0.0


class TestSnr:
    def test_noiseless_at_origin(self):
        assert snr_at_distance(budget(), 0.0) == pytest.approx(3600.0, rel=1e-12)

    def test_with_converter_noise(self):
        b = budget(converter_noise=101.0)
        assert snr_at_distance(b, 0.0) == pytest.approx(3600.0 / 102.0, rel=1e-12)

    def test_monotone_decreasing_with_dark_counts(self):
        b = budget(converter_noise=101.25)
        grid = np.linspace(0.0, 400.0, 81)
        values = [snr_at_distance(b, x) for x in grid]
        assert all(b2 < a2 for a2, b2 in zip(values, values[1:]))
        assert values[-1] > 0.0

    def test_constant_without_dark_counts(self):
        # numerator and denominator share the fiber transmittance
        b = budget(converter_noise=101.25, dark_rate=0.0)
        ref = snr_at_distance(b, 0.0)
        for x in (1.0, 50.0, 300.0):
            assert snr_at_distance(b, x) == pytest.approx(ref, rel=1e-12)

    def test_infinite_when_no_noise_at_all(self):
        assert math.isinf(snr_at_distance(budget(dark_rate=0.0), 10.0))

    def test_noiseless_dominates(self):
        noisy = budget(converter_noise=101.25)
        for x in (0.0, 10.0, 100.0):
            assert snr_at_distance(budget(), x) > snr_at_distance(noisy, x)


class TestDistanceForSnr:
    def test_noiseless_threshold_one(self):
        d = distance_for_snr(budget(), 1.0)
        assert d == pytest.approx(10.0 * math.log10(3600.0) / 0.17, abs=1e-5)
        assert d == pytest.approx(209.194, abs=1e-3)

    def test_converter_budget(self):
        d = distance_for_snr(budget(converter_noise=101.25), 1.0)
        assert d == pytest.approx(208.4655, abs=1e-3)

    def test_threshold_at_origin(self):
        b = budget()
        assert distance_for_snr(b, snr_at_distance(b, 0.0)) \
            == pytest.approx(0.0, abs=1e-6)

    def test_unattainable_threshold(self):
        with pytest.raises(ValueError, match="not attainable"):
            distance_for_snr(budget(), 1e9)

    def test_no_dark_counts(self):
        with pytest.raises(ValueError):
            distance_for_snr(budget(dark_rate=0.0), 1.0)

    def test_round_trip_randomized(self):
        rng = np.random.default_rng(13)
        for _ in range(50):
            b = budget(converter_noise=rng.uniform(0.0, 500.0),
                       dark_rate=rng.uniform(0.1, 10.0),
                       attenuation=rng.uniform(0.1, 0.5))
            x = rng.uniform(0.0, 150.0)
            target = snr_at_distance(b, x)
            assert distance_for_snr(b, target) == pytest.approx(x, abs=1e-6)
            assert distance_for_snr(b, target) \
                == pytest.approx(closed_form_distance(b, target), abs=1e-6)


class TestSweep:
    def budgets(self):
        return [
            ("noiseless", budget()),
            ("ppktp", budget(converter_noise=101.25)),
            ("ppln", budget(converter_noise=506.25)),
        ]

    def test_shape_and_header(self):
        grid = np.linspace(0.0, 200.0, 201)
        sweep = snr_sweep(self.budgets(), grid)
        assert sweep.values.shape == (201, 3)
        assert sweep.column_header() \
            == ["distance_km", "snr_noiseless", "snr_ppktp", "snr_ppln"]

    def test_fivefold_advantage_at_origin(self):
        sweep = snr_sweep(self.budgets(), [0.0])
        ratio = sweep.ratio("ppktp", "ppln")[0]
        assert ratio == pytest.approx(507.25 / 102.25, rel=1e-12)
        assert ratio == pytest.approx(5.0, abs=0.1)

    def test_ratio_decays_toward_one(self):
        grid = np.linspace(0.0, 500.0, 51)
        sweep = snr_sweep(self.budgets(), grid)
        ratios = sweep.ratio("ppktp", "ppln")
        assert all(b <= a + 1e-12 for a, b in zip(ratios, ratios[1:]))
        assert ratios[-1] == pytest.approx(1.0, abs=0.05)

    def test_single_point_matches_direct(self):
        b = budget(converter_noise=101.25)
        sweep = snr_sweep([("only", b)], [42.0])
        assert sweep.values[0, 0] == pytest.approx(snr_at_distance(b, 42.0))

    def test_zero_noise_ratios_are_one(self):
        pair = [("a", budget(dark_rate=0.0, converter_noise=5.0)),
                ("b", budget(dark_rate=0.0, converter_noise=5.0))]
        sweep = snr_sweep(pair, np.linspace(0.0, 100.0, 11))
        assert np.allclose(sweep.ratio("a", "b"), 1.0, rtol=1e-12)

    def test_empty_grid_rejected(self):
        with pytest.raises(ValueError):
            snr_sweep(self.budgets(), [])
