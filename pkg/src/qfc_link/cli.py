"""Batch command-line front end.

    qfc-link efficiency|cavity|link|bell|g2 [--config FILE] [--out DIR]
             [--seed N] [--mode M]

Each command loads one JSON config (--config, falling back to the
QFC_LINK_CONFIG environment variable), computes everything in memory,
then writes its artifacts plus a manifest.json with per-file SHA-256
checksums. Nothing is written when validation or computation fails,
so a run directory is either complete or absent.

Exit codes: 0 success, 2 input/config error (unreadable or invalid
config, malformed CSV, I/O failure), 3 numerical failure (fit or
quadrature non-convergence, data that defeats an estimator, incomplete
expectation sets).
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .cavity import cavity_figures, infer_round_trip_loss
from .config import (CONFIG_ENV_VAR, budgets_from_config, cavity_from_config,
                     chain_from_config, grid_from_config, load_config,
                     process_from_config)
from .conversion import (boyd_kleinman_hm, conversion_efficiency,
                         fit_full_conversion_power, full_conversion_power,
                         optimal_focusing)
from .errors import ConfigError, NumericsError
from .link import chain_product, distance_for_snr, snr_sweep
from .reporting import (read_depletion_csv, read_expectations_csv,
                        read_franson_csv, read_histogram_csv, write_csv,
                        write_json, write_manifest)
from .verification import (cauchy_schwarz_significance, chained_bell_value,
                           chained_bounds, correct_visibility, fit_visibility,
                           model_expectations, normalize_g2, optimal_schedule,
                           simulate_bell_trials)

_MODES = ("analyze", "simulate", "table")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qfc-link",
        description="Frequency-conversion link physics and statistics runner")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in [
        ("efficiency", "conversion-efficiency curve and full-conversion power"),
        ("cavity", "cavity finesse, enhancement and mode figures"),
        ("link", "SNR-versus-distance sweep over the configured budgets"),
        ("bell", "chained Bell bounds, analysis of measured terms, or Monte-Carlo"),
        ("g2", "cross-correlation peak and Franson visibilities"),
    ]:
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", metavar="FILE",
                       help=f"JSON run config (default: ${CONFIG_ENV_VAR})")
        p.add_argument("--out", metavar="DIR",
                       help="output directory (overrides config output_dir)")
        p.add_argument("--seed", type=int, metavar="N",
                       help="random seed (overrides config seed)")
        if name == "bell":
            p.add_argument("--mode", choices=_MODES, default="table",
                           help="bell sub-mode (default: table)")
    return parser


def _require(cfg: dict, section: str) -> dict:
    if section not in cfg:
        raise ConfigError(f"config has no '{section}' section")
    return cfg[section]


def _resolve_out(args, cfg: dict) -> Path:
    out = args.out or cfg.get("output_dir")
    if not out:
        raise ConfigError("no output directory: set output_dir or pass --out")
    return Path(out)


def cmd_efficiency(cfg: dict, out_dir: Path) -> list[Path]:
    sec = _require(cfg, "efficiency")
    grid = grid_from_config(sec["power_grid_w"])

    diagnostics: dict = {"power_grid_w": {"start": float(grid[0]),
                                          "stop": float(grid[-1]),
                                          "num": int(grid.size)}}
    if "p_max_w" in sec:
        p_max = sec["p_max_w"]
        diagnostics["p_max_w"] = p_max
        diagnostics["p_max_source"] = "given"
    else:
        samples = read_depletion_csv(sec["depletion_csv"])
        fit = fit_full_conversion_power(samples)
        p_max = fit.p_max
        diagnostics["p_max_w"] = fit.p_max
        diagnostics["p_max_sigma_w"] = fit.uncertainty
        diagnostics["p_max_residual_norm"] = fit.residual_norm
        diagnostics["p_max_source"] = "fitted"
        diagnostics["depletion_samples"] = len(samples)

    if "process" in cfg:
        process, focus = process_from_config(cfg["process"])
        if focus is not None:
            h = focus.factor()
            diagnostics["xi"] = focus.xi
            diagnostics["sigma"] = focus.sigma
        else:
            xi_opt, h = optimal_focusing()
            diagnostics["xi"] = xi_opt
            diagnostics["sigma"] = None
        diagnostics["focusing_factor_h"] = h
        diagnostics["predicted_full_conversion_power_w"] = \
            full_conversion_power(process, h)
        diagnostics["target_nm"] = process.lambda_t * 1e9

    rows = [(float(p), conversion_efficiency(float(p), p_max)) for p in grid]
    artifacts = [
        write_csv(out_dir / "efficiency_curve.csv",
                  ["power_w", "efficiency"], rows),
        write_json(out_dir / "efficiency.json", diagnostics),
    ]
    return artifacts


def cmd_cavity(cfg: dict, out_dir: Path) -> list[Path]:
    sec = _require(cfg, "cavity")
    spec = cavity_from_config(sec)
    p_in = sec.get("incident_power_w", 1.0)
    coupling = sec.get("mode_coupling", 1.0)

    def figures_payload(s) -> dict:
        fig = cavity_figures(s, p_in, coupling)
        return {
            "finesse": fig.finesse,
            "enhancement": fig.enhancement,
            "circulating_power_w": fig.circulating_power,
            "rayleigh_range_m": fig.mode_rayleigh_range,
            "focusing_parameter": fig.focusing_parameter,
        }

    payload = {
        "incident_power_w": p_in,
        "mode_coupling": coupling,
        "round_trip_loss": spec.round_trip_extra_loss,
        "figures": figures_payload(spec),
    }
    if "measured_finesse" in sec:
        loss = infer_round_trip_loss(sec["measured_finesse"],
                                     spec.reflectivity_in,
                                     spec.reflectivity_out)
        payload["measured_finesse"] = sec["measured_finesse"]
        payload["inferred_round_trip_loss"] = loss
        payload["figures_at_inferred_loss"] = figures_payload(
            replace(spec, round_trip_extra_loss=loss))
    return [write_json(out_dir / "cavity.json", payload)]


def cmd_link(cfg: dict, out_dir: Path) -> list[Path]:
    sec = _require(cfg, "link")
    chain = chain_from_config(cfg.get("efficiency_chain", []))
    budgets = budgets_from_config(sec, chain)
    grid = grid_from_config(sec["distance_grid_km"])
    sweep = snr_sweep(budgets, grid)

    header = sweep.column_header()
    columns = [sweep.distances_km] + [sweep.values[:, j]
                                      for j in range(len(sweep.names))]
    for a, b in sec.get("ratio_pairs", []):
        header.append(f"ratio_{a}_over_{b}")
        columns.append(sweep.ratio(a, b))
    rows = zip(*[[float(v) for v in col] for col in columns])

    summary: dict = {
        "chain_product": chain_product(chain) if chain.entries else None,
        "budgets": {},
    }
    for name, budget in budgets:
        entry = {
            "eta_ext": budget.eta_ext,
            "source_rate_hz": budget.source_rate,
            "converter_noise_hz": budget.converter_noise,
            "dark_rate_hz": budget.dark_rate,
            "attenuation_db_per_km": budget.attenuation,
            "snr_at_zero": sweep.values[0, sweep.names.index(name)],
        }
        if "snr_threshold" in sec:
            entry["distance_km_at_threshold"] = distance_for_snr(
                budget, sec["snr_threshold"])
            entry["snr_threshold"] = sec["snr_threshold"]
        summary["budgets"][name] = entry

    return [
        write_csv(out_dir / "link_snr.csv", header, rows),
        write_json(out_dir / "link.json", summary),
    ]


def _bell_table(sec: dict, out_dir: Path) -> list[Path]:
    n_min = sec.get("table_n_min", 2)
    n_max = sec.get("table_n_max", 12)
    if n_min > n_max:
        raise ConfigError(f"table_n_min {n_min} exceeds table_n_max {n_max}")
    rows = []
    for n in range(n_min, n_max + 1):
        s_lhv, s_qm, v_crit = chained_bounds(n)
        rows.append((n, s_lhv, s_qm, v_crit))
    return [write_csv(out_dir / "bell_table.csv",
                      ["n", "s_lhv", "s_qm", "v_crit"], rows)]


def _bell_analyze(sec: dict, out_dir: Path) -> list[Path]:
    for key in ("n_settings", "expectations_csv"):
        if key not in sec:
            raise ConfigError(f"bell analyze needs bell.{key}")
    n = sec["n_settings"]
    schedule = optimal_schedule(n)
    rows = read_expectations_csv(sec["expectations_csv"])

    by_key = {}
    for row in rows:
        key = (row["a_index"] - 1, row["b_index"] - 1, row["sign"])
        if key in by_key:
            raise ConfigError(
                f"duplicate term a={row['a_index']} b={row['b_index']} "
                f"sign={row['sign']:+d}")
        by_key[key] = row

    expectations, sigmas = [], []
    for term in schedule.terms:
        key = (term.a_index, term.b_index, term.sign)
        row = by_key.pop(key, None)
        if row is None:
            raise ValueError(
                f"incomplete expectation set: missing term "
                f"a={term.a_index + 1} b={term.b_index + 1} sign={term.sign:+d}")
        if row["expectation"] is None or row["sigma"] is None:
            raise ValueError(
                f"incomplete expectation set: term a={row['a_index']} "
                f"b={row['b_index']} has empty expectation/sigma")
        expectations.append(row["expectation"])
        sigmas.append(row["sigma"])
    if by_key:
        extra = sorted((a + 1, b + 1, s) for a, b, s in by_key)
        raise ConfigError(f"expectation rows outside the 2N-term pattern: {extra}")

    filled = replace(schedule, expectations=expectations, sigmas=sigmas)
    s, sigma = chained_bell_value(filled)
    s_lhv, s_qm, v_crit = chained_bounds(n)
    payload = {
        "n": n,
        "s": s,
        "sigma": sigma,
        "s_lhv": s_lhv,
        "s_qm": s_qm,
        "v_crit": v_crit,
        "significance": (s - s_lhv) / sigma if sigma > 0 else None,
        "violation": s > s_lhv,
    }
    return [write_json(out_dir / "bell_analysis.json", payload)]


def _bell_simulate(sec: dict, out_dir: Path, seed: int) -> list[Path]:
    for key in ("n_settings", "visibility", "amplitude_hz",
                "integration_time_s", "trials"):
        if key not in sec:
            raise ConfigError(f"bell simulate needs bell.{key}")
    n = sec["n_settings"]
    schedule = optimal_schedule(n)
    sim = simulate_bell_trials(
        schedule,
        visibility=sec["visibility"],
        amplitude=sec["amplitude_hz"],
        accidental_rate=sec.get("accidental_rate_hz", 0.0),
        integration_time=sec["integration_time_s"],
        trials=sec["trials"],
        seed=seed,
    )
    s_lhv, s_qm, v_crit = chained_bounds(n)
    model = model_expectations(schedule, sec["visibility"])
    model_s, _ = chained_bell_value(model)
    payload = {
        "n": n,
        "seed": seed,
        "trials": sec["trials"],
        "visibility": sec["visibility"],
        "amplitude_hz": sec["amplitude_hz"],
        "accidental_rate_hz": sec.get("accidental_rate_hz", 0.0),
        "integration_time_s": sec["integration_time_s"],
        "mean_s": sim.mean_s,
        "sigma_mean_s": sim.sigma_mean_s,
        "per_trial_s": [float(v) for v in sim.s_values],
        "per_trial_sigma": [float(v) for v in sim.s_sigmas],
        "model_s": model_s,
        "s_lhv": s_lhv,
        "s_qm": s_qm,
        "v_crit": v_crit,
        "significance": ((sim.mean_s - s_lhv) / sim.sigma_mean_s
                         if sim.sigma_mean_s > 0 else None),
    }
    count_rows = []
    for t in range(sim.counts.shape[0]):
        for i, term in enumerate(schedule.terms):
            count_rows.append((t + 1, i + 1, term.a_index + 1,
                               term.b_index + 1, term.sign,
                               float(sim.counts[t, i, 0]),
                               float(sim.counts[t, i, 1])))
    return [
        write_json(out_dir / "bell_simulation.json", payload),
        write_csv(out_dir / "bell_counts.csv",
                  ["trial", "term", "a_index", "b_index", "sign",
                   "counts_at_phase", "counts_at_phase_plus_pi"],
                  count_rows),
    ]


def cmd_bell(cfg: dict, out_dir: Path, mode: str, seed: int) -> list[Path]:
    sec = cfg.get("bell", {})
    if mode == "table":
        return _bell_table(sec, out_dir)
    if mode == "analyze":
        return _bell_analyze(sec, out_dir)
    return _bell_simulate(sec, out_dir, seed)


def cmd_g2(cfg: dict, out_dir: Path) -> list[Path]:
    g2_sec = _require(cfg, "g2")
    franson_sec = _require(cfg, "franson")

    hist = read_histogram_csv(g2_sec["histogram_csv"],
                              g2_sec["integration_time_s"])
    g2, sigma = normalize_g2(
        hist,
        peak_window_bins=g2_sec.get("peak_window_bins", 1),
        background_exclusion_bins=g2_sec.get("background_exclusion_bins", 10),
        mask_bins=tuple(g2_sec.get("sidelobe_mask_bins", ())))
    bound = g2_sec.get("classical_bound", 2.0)
    significance = cauchy_schwarz_significance(g2, sigma, bound)

    scan = read_franson_csv(franson_sec["scan_csv"])
    ports = franson_sec.get("ports") or scan.ports()
    accidental = franson_sec.get("accidental_rate_hz", 0.0)
    per_port = {}
    for port in ports:
        fit = fit_visibility(scan, port)
        rate = (accidental.get(port, 0.0) if isinstance(accidental, dict)
                else accidental)
        per_port[port] = {
            "raw_visibility": fit.visibility,
            "sigma_visibility": fit.sigma_visibility,
            "corrected_visibility": correct_visibility(
                fit.visibility, fit.amplitude, rate),
            "phase_offset_rad": fit.phase_offset,
            "amplitude_hz": fit.amplitude,
            "accidental_rate_hz": rate,
        }

    payload = {
        "g2": {
            "value": g2,
            "sigma": sigma,
            "classical_bound": bound,
            "significance": significance,
            "bins": int(hist.counts.size),
            "bin_width_s": hist.bin_width,
        },
        "franson": per_port,
    }
    return [write_json(out_dir / "g2_franson.json", payload)]


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    config_path = args.config or os.environ.get(CONFIG_ENV_VAR)
    try:
        if not config_path:
            raise ConfigError(
                f"no config: pass --config or set {CONFIG_ENV_VAR}")
        cfg = load_config(config_path)
        seed = args.seed if args.seed is not None else cfg["seed"]
        if seed < 0:
            raise ConfigError("seed must be nonnegative")
        out_dir = _resolve_out(args, cfg)

        if args.command == "efficiency":
            artifacts = cmd_efficiency(cfg, out_dir)
        elif args.command == "cavity":
            artifacts = cmd_cavity(cfg, out_dir)
        elif args.command == "link":
            artifacts = cmd_link(cfg, out_dir)
        elif args.command == "bell":
            artifacts = cmd_bell(cfg, out_dir, args.mode, seed)
        else:
            artifacts = cmd_g2(cfg, out_dir)
        artifacts.append(write_manifest(out_dir, config_path, seed,
                                        artifacts, __version__))
    except ConfigError as exc:
        print(f"qfc-link: config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"qfc-link: i/o error: {exc}", file=sys.stderr)
        return 2
    except NumericsError as exc:
        print(f"qfc-link: numerical failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"qfc-link: computation rejected: {exc}", file=sys.stderr)
        return 3
    for path in artifacts:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
