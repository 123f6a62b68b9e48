"""Run-configuration schema and typed builders.

A run is described by one JSON file validated against CONFIG_SCHEMA.
Keys carry their unit as a suffix (_nm, _mm, _w, _km, _hz, _s, ...);
the builders convert to the SI units the library works in. Paths to
data files (CSV) are resolved relative to the configuration file's
directory. Unknown keys are rejected everywhere: a typo should fail
loudly, not silently fall back to a default.
"""

from __future__ import annotations

import json
import math
from dataclasses import replace
from pathlib import Path

import jsonschema
import numpy as np

from .cavity import CavitySpec
from .conversion import ConversionProcess, FocusConfig, complete_wavelength_triple
from .errors import ConfigError
from .link import EfficiencyChain, LinkBudget, chain_product, converter_noise_rate

__all__ = [
    "CONFIG_SCHEMA",
    "CONFIG_ENV_VAR",
    "load_config",
    "grid_from_config",
    "process_from_config",
    "cavity_from_config",
    "chain_from_config",
    "budgets_from_config",
]

#: Environment variable consulted for the default --config path.
CONFIG_ENV_VAR = "QFC_LINK_CONFIG"

_GRID = {
    "type": "object",
    "additionalProperties": False,
    "required": ["start", "stop", "num"],
    "properties": {
        "start": {"type": "number", "minimum": 0},
        "stop": {"type": "number", "exclusiveMinimum": 0},
        "num": {"type": "integer", "minimum": 2},
    },
}

_BUDGET = {
    "type": "object",
    "additionalProperties": False,
    "required": ["name", "source_rate_hz", "dark_rate_hz",
                 "attenuation_db_per_km", "filter_width_nm",
                 "filter_transmission"],
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "eta_ext": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "source_rate_hz": {"type": "number", "exclusiveMinimum": 0},
        "converter_noise_hz": {"type": "number", "minimum": 0},
        "nsd_ext_khz_per_nm": {"type": "number", "minimum": 0},
        "detector_efficiency": {"type": "number", "exclusiveMinimum": 0,
                                "maximum": 1},
        "dark_rate_hz": {"type": "number", "minimum": 0},
        "attenuation_db_per_km": {"type": "number", "exclusiveMinimum": 0},
        "filter_width_nm": {"type": "number", "exclusiveMinimum": 0},
        "filter_transmission": {"type": "number", "exclusiveMinimum": 0,
                                "maximum": 1},
    },
    # exactly one way to state the converter noise
    "oneOf": [
        {"required": ["converter_noise_hz"],
         "not": {"required": ["nsd_ext_khz_per_nm"]}},
        {"required": ["nsd_ext_khz_per_nm"],
         "not": {"required": ["converter_noise_hz"]}},
    ],
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["seed"],
    "properties": {
        "seed": {"type": "integer", "minimum": 0},
        "output_dir": {"type": "string", "minLength": 1},
        "process": {
            "type": "object",
            "additionalProperties": False,
            "required": ["red_nm", "pump_nm", "index_red", "index_pump",
                         "index_target", "d_eff_pm_per_v", "crystal_length_mm",
                         "poling_period_um"],
            "properties": {
                "red_nm": {"type": "number", "exclusiveMinimum": 0},
                "pump_nm": {"type": "number", "exclusiveMinimum": 0},
                "target_nm": {"type": "number", "exclusiveMinimum": 0},
                "index_red": {"type": "number", "exclusiveMinimum": 0},
                "index_pump": {"type": "number", "exclusiveMinimum": 0},
                "index_target": {"type": "number", "exclusiveMinimum": 0},
                "d_eff_pm_per_v": {"type": "number", "exclusiveMinimum": 0},
                "crystal_length_mm": {"type": "number", "exclusiveMinimum": 0},
                "poling_period_um": {"type": "number", "exclusiveMinimum": 0},
                "xi": {"type": "number", "exclusiveMinimum": 0},
                "sigma": {"type": "number"},
            },
        },
        "cavity": {
            "type": "object",
            "additionalProperties": False,
            "required": ["length_mm", "mirror_curvature_mm", "reflectivity_in",
                         "reflectivity_out", "index"],
            "properties": {
                "length_mm": {"type": "number", "exclusiveMinimum": 0},
                "mirror_curvature_mm": {"type": "number", "exclusiveMinimum": 0},
                "reflectivity_in": {"type": "number", "exclusiveMinimum": 0,
                                    "exclusiveMaximum": 1},
                "reflectivity_out": {"type": "number", "exclusiveMinimum": 0,
                                     "exclusiveMaximum": 1},
                "index": {"type": "number", "exclusiveMinimum": 0},
                "round_trip_loss": {"type": "number", "minimum": 0,
                                    "exclusiveMaximum": 1},
                "measured_finesse": {"type": "number", "exclusiveMinimum": 0},
                "incident_power_w": {"type": "number", "minimum": 0},
                "mode_coupling": {"type": "number", "minimum": 0, "maximum": 1},
            },
        },
        "efficiency_chain": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["label", "factor"],
                "properties": {
                    "label": {"type": "string", "minLength": 1},
                    "factor": {"type": "number", "exclusiveMinimum": 0,
                               "maximum": 1},
                },
            },
        },
        "efficiency": {
            "type": "object",
            "additionalProperties": False,
            "required": ["power_grid_w"],
            "properties": {
                "p_max_w": {"type": "number", "exclusiveMinimum": 0},
                "depletion_csv": {"type": "string", "minLength": 1},
                "power_grid_w": _GRID,
            },
            "oneOf": [
                {"required": ["p_max_w"],
                 "not": {"required": ["depletion_csv"]}},
                {"required": ["depletion_csv"],
                 "not": {"required": ["p_max_w"]}},
            ],
        },
        "link": {
            "type": "object",
            "additionalProperties": False,
            "required": ["budgets", "distance_grid_km"],
            "properties": {
                "budgets": {"type": "array", "minItems": 1, "items": _BUDGET},
                "distance_grid_km": _GRID,
                "ratio_pairs": {
                    "type": "array",
                    "items": {
                        "type": "array",
                        "items": {"type": "string"},
                        "minItems": 2,
                        "maxItems": 2,
                    },
                },
                "snr_threshold": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "bell": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_settings": {"type": "integer", "minimum": 2, "maximum": 12},
                "visibility": {"type": "number", "minimum": 0, "maximum": 1},
                "amplitude_hz": {"type": "number", "exclusiveMinimum": 0},
                "accidental_rate_hz": {"type": "number", "minimum": 0},
                "integration_time_s": {"type": "number", "exclusiveMinimum": 0},
                "trials": {"type": "integer", "minimum": 1},
                "expectations_csv": {"type": "string", "minLength": 1},
                "table_n_min": {"type": "integer", "minimum": 2, "maximum": 12},
                "table_n_max": {"type": "integer", "minimum": 2, "maximum": 12},
            },
        },
        "franson": {
            "type": "object",
            "additionalProperties": False,
            "required": ["scan_csv"],
            "properties": {
                "scan_csv": {"type": "string", "minLength": 1},
                "accidental_rate_hz": {
                    "oneOf": [
                        {"type": "number", "minimum": 0},
                        {"type": "object",
                         "additionalProperties": {"type": "number",
                                                  "minimum": 0}},
                    ],
                },
                "ports": {
                    "type": "array",
                    "minItems": 1,
                    "items": {"enum": ["++", "+-", "-+", "--"]},
                },
            },
        },
        "g2": {
            "type": "object",
            "additionalProperties": False,
            "required": ["histogram_csv", "integration_time_s"],
            "properties": {
                "histogram_csv": {"type": "string", "minLength": 1},
                "integration_time_s": {"type": "number", "exclusiveMinimum": 0},
                "peak_window_bins": {"type": "integer", "minimum": 1},
                "background_exclusion_bins": {"type": "integer", "minimum": 0},
                "classical_bound": {"type": "number", "exclusiveMinimum": 0},
                "sidelobe_mask_bins": {
                    "type": "array",
                    "items": {"type": "integer", "minimum": 0},
                },
            },
        },
    },
}

# (section, key) pairs holding paths to resolve against the config dir
_PATH_KEYS = [
    ("efficiency", "depletion_csv"),
    ("bell", "expectations_csv"),
    ("franson", "scan_csv"),
    ("g2", "histogram_csv"),
]


def load_config(path: str | Path) -> dict:
    """Read, validate and normalize one JSON run configuration.

    Relative CSV paths are rewritten to absolute ones (anchored at the
    config file's directory) so later readers need no extra context.
    Raises ConfigError for unreadable files, invalid JSON and schema
    violations.
    """
    path = Path(path)
    try:
        raw = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config {path}: {exc.message} (at {where})") from exc

    base = path.resolve().parent
    for section, key in _PATH_KEYS:
        if section in cfg and key in cfg[section]:
            p = Path(cfg[section][key])
            if not p.is_absolute():
                p = base / p
            cfg[section][key] = str(p)
    return cfg


def grid_from_config(section: dict) -> np.ndarray:
    """Uniform grid from a {start, stop, num} block."""
    if not section["stop"] > section["start"]:
        raise ConfigError(
            f"grid stop {section['stop']} must exceed start {section['start']}")
    return np.linspace(section["start"], section["stop"], section["num"])


def process_from_config(section: dict) -> tuple[ConversionProcess, FocusConfig | None]:
    """Build the mixing-process description from its config block.

    A missing target wavelength is completed from energy conservation.
    Returns the process and, when the block pins the focusing, the
    focus configuration (None means "use the optimal focus").
    """
    red_nm = section["red_nm"]
    pump_nm = section["pump_nm"]
    target_nm = section.get("target_nm")
    if target_nm is None:
        target_nm = complete_wavelength_triple(red_nm, pump_nm, "red+pump")
    try:
        process = ConversionProcess(
            lambda_r=red_nm * 1e-9,
            lambda_p=pump_nm * 1e-9,
            lambda_t=target_nm * 1e-9,
            n_r=section["index_red"],
            n_p=section["index_pump"],
            n_t=section["index_target"],
            d_eff=section["d_eff_pm_per_v"] * 1e-12,
            crystal_length=section["crystal_length_mm"] * 1e-3,
            domain_length=0.5 * section["poling_period_um"] * 1e-6,
        )
    except ValueError as exc:
        raise ConfigError(f"process block rejected: {exc}") from exc
    focus = None
    if "xi" in section:
        focus = FocusConfig(xi=section["xi"], sigma=section.get("sigma"))
    elif "sigma" in section:
        raise ConfigError("process.sigma is meaningless without process.xi")
    return process, focus


def cavity_from_config(section: dict) -> CavitySpec:
    """Build the cavity geometry; measurement extras stay in the dict."""
    try:
        return CavitySpec(
            reflectivity_in=section["reflectivity_in"],
            reflectivity_out=section["reflectivity_out"],
            round_trip_extra_loss=section.get("round_trip_loss", 0.0),
            geometric_length=section["length_mm"] * 1e-3,
            facet_curvature_radius=section["mirror_curvature_mm"] * 1e-3,
            index_at_pump=section["index"],
        )
    except ValueError as exc:
        raise ConfigError(f"cavity block rejected: {exc}") from exc


def chain_from_config(entries: list[dict]) -> EfficiencyChain:
    try:
        return EfficiencyChain(
            entries=[(e["label"], e["factor"]) for e in entries])
    except ValueError as exc:
        raise ConfigError(f"efficiency_chain rejected: {exc}") from exc


def budgets_from_config(section: dict,
                        chain: EfficiencyChain | None = None
                        ) -> list[tuple[str, LinkBudget]]:
    """Build the named link budgets of the SNR sweep.

    A budget without an explicit eta_ext falls back to the product of
    the efficiency chain; converter noise may be given directly [Hz]
    or as an external spectral density [kHz/nm] that is folded through
    the narrowband filter and the detector.
    """
    budgets = []
    names = set()
    for entry in section["budgets"]:
        name = entry["name"]
        if name in names:
            raise ConfigError(f"duplicate budget name {name!r}")
        names.add(name)

        if "eta_ext" in entry:
            eta_ext = entry["eta_ext"]
        elif chain is not None and chain.entries:
            eta_ext = chain_product(chain)
        else:
            raise ConfigError(
                f"budget {name!r} has no eta_ext and no efficiency_chain "
                "to fall back on")
        try:
            budget = LinkBudget(
                eta_ext=eta_ext,
                source_rate=entry["source_rate_hz"],
                converter_noise=entry.get("converter_noise_hz", 0.0),
                dark_rate=entry["dark_rate_hz"],
                attenuation=entry["attenuation_db_per_km"],
                narrowband_filter_width=entry["filter_width_nm"],
                narrowband_filter_transmission=entry["filter_transmission"],
            )
            if "nsd_ext_khz_per_nm" in entry:
                rate = converter_noise_rate(
                    entry["nsd_ext_khz_per_nm"] * 1e3, budget,
                    detector_efficiency=entry.get("detector_efficiency", 0.9))
                budget = replace(budget, converter_noise=rate)
        except ValueError as exc:
            raise ConfigError(f"budget {name!r} rejected: {exc}") from exc
        budgets.append((name, budget))

    for pair in section.get("ratio_pairs", []):
        for ref in pair:
            if ref not in names:
                raise ConfigError(
                    f"ratio_pairs references unknown budget {ref!r}")
        if pair[0] == pair[1]:
            raise ConfigError(f"ratio pair {pair} compares a budget to itself")
    if not math.isfinite(sum(b.converter_noise for _, b in budgets)):
        raise ConfigError("non-finite converter noise")  # pragma: no cover
    return budgets
