"""Frequency-converted single-photon link: physics and statistics toolkit.

Four layers, importable separately:

- conversion: three-wave mixing efficiency, focusing factors, the
  full-conversion power and its fit;
- cavity: monolithic resonator finesse, enhancement, mode geometry;
- link: noise spectral densities, collection chains, SNR vs distance;
- verification: g2 normalization, Franson visibility fits, chained
  Bell machinery and the Poissonian count simulator.

The qfc-link console script (cli module) drives batch runs from JSON
configs.
"""

from .cavity import (CavityFigures, CavitySpec, cavity_figures,
                     circulating_power, enhancement, finesse,
                     infer_round_trip_loss, resonator_mode)
from .conversion import (ConversionProcess, DepletionSample, FocusConfig,
                         PmaxFit, bandwidth_wavelength_from_frequency,
                         boyd_kleinman_h, boyd_kleinman_hm,
                         complete_wavelength_triple, conversion_efficiency,
                         fit_full_conversion_power, full_conversion_power,
                         optimal_focusing, phase_matching_response,
                         pump_for_target_efficiency)
from .errors import ConfigError, FitError, NumericsError
from .link import (EfficiencyChain, LinkBudget, NoiseMeasurement, SnrSweep,
                   chain_product, converter_noise_rate, distance_for_snr,
                   fit_noise_slope, generated_nsd, snr_at_distance, snr_sweep)
from .verification import (BellSchedule, BellSimulation, BellTerm,
                           CoincidenceHistogram, FransonFit, FransonPoint,
                           FransonScan, PortRates, cauchy_schwarz_significance,
                           chained_bell_value, chained_bounds,
                           correct_visibility, expectation_from_pair,
                           expectation_from_rates, fit_visibility,
                           franson_fringe, model_expectations, normalize_g2,
                           optimal_schedule, simulate_bell_trials,
                           simulate_franson_scan, two_detector_completion)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # conversion
    "ConversionProcess", "FocusConfig", "DepletionSample", "PmaxFit",
    "complete_wavelength_triple", "boyd_kleinman_h", "boyd_kleinman_hm",
    "optimal_focusing", "full_conversion_power", "conversion_efficiency",
    "pump_for_target_efficiency", "phase_matching_response",
    "bandwidth_wavelength_from_frequency", "fit_full_conversion_power",
    # cavity
    "CavitySpec", "CavityFigures", "finesse", "enhancement",
    "infer_round_trip_loss", "circulating_power", "resonator_mode",
    "cavity_figures",
    # link
    "EfficiencyChain", "NoiseMeasurement", "LinkBudget", "SnrSweep",
    "chain_product", "generated_nsd", "fit_noise_slope",
    "converter_noise_rate", "snr_at_distance", "distance_for_snr",
    "snr_sweep",
    # verification
    "CoincidenceHistogram", "FransonPoint", "FransonScan", "FransonFit",
    "PortRates", "BellTerm", "BellSchedule", "BellSimulation",
    "normalize_g2", "cauchy_schwarz_significance", "franson_fringe",
    "fit_visibility", "correct_visibility", "expectation_from_rates",
    "expectation_from_pair", "two_detector_completion", "chained_bounds",
    "optimal_schedule", "model_expectations", "chained_bell_value",
    "simulate_franson_scan", "simulate_bell_trials",
    # errors
    "NumericsError", "FitError", "ConfigError",
]
