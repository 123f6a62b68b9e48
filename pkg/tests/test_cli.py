import json
import math

import numpy as np
import pytest

from qfc_link.cli import main
from qfc_link.config import CONFIG_ENV_VAR
from qfc_link.conversion import conversion_efficiency
from qfc_link.verification import (
    chained_bounds,
    model_expectations,
    optimal_schedule,
    simulate_franson_scan,
)

CAVITY_BLOCK = {
    "length_mm": 20.0, "mirror_curvature_mm": 14.0,
    "reflectivity_in": 0.98, "reflectivity_out": 0.98, "index": 1.8,
    "measured_finesse": 146.0, "incident_power_w": 1.49,
}

LINK_BLOCK = {
    "budgets": [
        {"name": "noiseless", "eta_ext": 0.15, "source_rate_hz": 24000.0,
         "converter_noise_hz": 0.0, "dark_rate_hz": 1.0,
         "attenuation_db_per_km": 0.17, "filter_width_nm": 0.005,
         "filter_transmission": 0.5},
        {"name": "ppktp_cavity", "eta_ext": 0.15, "source_rate_hz": 24000.0,
         "nsd_ext_khz_per_nm": 45.0, "detector_efficiency": 0.9,
         "dark_rate_hz": 1.0, "attenuation_db_per_km": 0.17,
         "filter_width_nm": 0.005, "filter_transmission": 0.5},
        {"name": "ppln_waveguide", "eta_ext": 0.15, "source_rate_hz": 24000.0,
         "nsd_ext_khz_per_nm": 225.0, "detector_efficiency": 0.9,
         "dark_rate_hz": 1.0, "attenuation_db_per_km": 0.17,
         "filter_width_nm": 0.005, "filter_transmission": 0.5},
    ],
    "distance_grid_km": {"start": 0.0, "stop": 200.0, "num": 201},
    "ratio_pairs": [["ppktp_cavity", "ppln_waveguide"]],
    "snr_threshold": 1.0,
}

BELL_BLOCK = {
    "n_settings": 5, "visibility": 0.976, "amplitude_hz": 240.0,
    "integration_time_s": 2.0, "trials": 10,
}


def write_config(tmp_path, payload, name="run.json"):
    payload = dict({"seed": 7}, **payload)
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return path


def run(*args):
    return main([str(a) for a in args])


def write_franson_scan(path, visibility=0.982, accidental=15.3):
    phases = np.linspace(0.0, 2 * math.pi, 16, endpoint=False)
    scan = simulate_franson_scan(phases, 5000.0, visibility,
                                 accidental_rate=accidental,
                                 integration_time=5.0, exact=True)
    lines = ["phase_rad,port,counts,time_s"]
    lines += [f"{p.phase!r},{p.port},{p.counts!r},{p.time_s!r}"
              for p in scan.points]
    path.write_text("\n".join(lines) + "\n")


def write_histogram(path, n_bins=201, flat=100, peak=31045):
    lines = ["delay_s,counts"]
    center = n_bins // 2
    for i in range(n_bins):
        count = peak if i == center else flat
        lines.append(f"{(i - center) * 1e-12!r},{count}")
    path.write_text("\n".join(lines) + "\n")


def write_expectations(path, n=5, visibility=0.976, sigma=0.017 / math.sqrt(10),
                       mutate=None):
    sched = model_expectations(optimal_schedule(n), visibility)
    rows = []
    for term, e in zip(sched.terms, sched.expectations):
        rows.append([term.a_index + 1, term.b_index + 1, term.sign,
                     repr(float(e)), repr(sigma)])
    if mutate:
        rows = mutate(rows)
    lines = ["a_index,b_index,sign,expectation,sigma"]
    lines += [",".join(str(c) for c in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


class TestEfficiencyCommand:
    def config(self, tmp_path, **efficiency):
        block = dict({"power_grid_w": {"start": 0.0, "stop": 80.0,
                                       "num": 161}}, **efficiency)
        return write_config(tmp_path, {"efficiency": block})

    def test_given_p_max(self, tmp_path, capsys):
        cfg = self.config(tmp_path, p_max_w=177.0)
        out = tmp_path / "out"
        assert run("efficiency", "--config", cfg, "--out", out) == 0
        printed = capsys.readouterr().out
        assert printed.count("wrote ") == 3

        lines = (out / "efficiency_curve.csv").read_text().splitlines()
        assert lines[0] == "power_w,efficiency"
        assert len(lines) == 162
        power, eta = (float(c) for c in lines[150].split(","))
        assert power == 74.5
        assert eta == conversion_efficiency(74.5, 177.0)
        assert eta == pytest.approx(0.7253, abs=5e-4)

        payload = json.loads((out / "efficiency.json").read_text())
        assert payload["p_max_source"] == "given"
        assert payload["p_max_w"] == 177.0

    def test_fitted_p_max(self, tmp_path):
        depletion = tmp_path / "depletion.csv"
        powers = [20.0, 44.25, 74.5, 100.0, 130.0, 177.0]
        rows = [f"{p!r},{conversion_efficiency(p, 177.0)!r}" for p in powers]
        depletion.write_text("power_w,efficiency\n" + "\n".join(rows) + "\n")
        cfg = self.config(tmp_path, depletion_csv="depletion.csv")
        out = tmp_path / "out"
        assert run("efficiency", "--config", cfg, "--out", out) == 0
        payload = json.loads((out / "efficiency.json").read_text())
        assert payload["p_max_source"] == "fitted"
        assert payload["p_max_w"] == pytest.approx(177.0, rel=1e-6)
        assert payload["p_max_sigma_w"] >= 0.0
        assert payload["depletion_samples"] == 6

    def test_process_prediction(self, tmp_path):
        cfg_payload = {
            "efficiency": {"p_max_w": 177.0,
                           "power_grid_w": {"start": 0.0, "stop": 80.0,
                                            "num": 9}},
            "process": {"red_nm": 637.0, "pump_nm": 1064.0,
                        "index_red": 1.8, "index_pump": 1.8,
                        "index_target": 1.8, "d_eff_pm_per_v": 10.8,
                        "crystal_length_mm": 20.0, "poling_period_um": 15.7},
        }
        cfg = write_config(tmp_path, cfg_payload)
        out = tmp_path / "out"
        assert run("efficiency", "--config", cfg, "--out", out) == 0
        payload = json.loads((out / "efficiency.json").read_text())
        assert payload["target_nm"] == pytest.approx(1587.28, abs=0.01)
        assert payload["predicted_full_conversion_power_w"] > 0.0
        assert payload["focusing_factor_h"] == pytest.approx(1.068, abs=1e-3)

    def test_missing_section(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {})
        assert run("efficiency", "--config", cfg, "--out", tmp_path / "o") == 2
        assert "config error" in capsys.readouterr().err

    def test_invalid_json(self, tmp_path):
        cfg = tmp_path / "broken.json"
        cfg.write_text("{nope")
        assert run("efficiency", "--config", cfg, "--out", tmp_path / "o") == 2

    def test_unknown_key(self, tmp_path):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"seed": 1, "bogus": True}))
        assert run("efficiency", "--config", cfg, "--out", tmp_path / "o") == 2

    def test_bad_grid(self, tmp_path):
        cfg = self.config(tmp_path, p_max_w=177.0)
        payload = json.loads(cfg.read_text())
        payload["efficiency"]["power_grid_w"] = {"start": 5.0, "stop": 5.0,
                                                 "num": 3}
        cfg.write_text(json.dumps(payload))
        assert run("efficiency", "--config", cfg, "--out", tmp_path / "o") == 2

    def test_no_output_dir(self, tmp_path):
        cfg = self.config(tmp_path, p_max_w=177.0)
        assert run("efficiency", "--config", cfg) == 2


class TestCavityCommand:
    def test_figures(self, tmp_path):
        cfg = write_config(tmp_path, {"cavity": CAVITY_BLOCK})
        out = tmp_path / "out"
        assert run("cavity", "--config", cfg, "--out", out) == 0
        payload = json.loads((out / "cavity.json").read_text())
        figures = payload["figures"]
        assert figures["finesse"] == pytest.approx(155.5, abs=0.1)
        assert figures["enhancement"] == pytest.approx(50.0, rel=1e-9)
        assert figures["circulating_power_w"] == pytest.approx(74.5, rel=1e-9)
        assert figures["focusing_parameter"] == pytest.approx(1.581, abs=1e-3)
        assert payload["inferred_round_trip_loss"] \
            == pytest.approx(0.0013138, abs=1e-6)
        degraded = payload["figures_at_inferred_loss"]
        assert degraded["finesse"] == pytest.approx(146.0, abs=1e-6)
        assert degraded["enhancement"] < 50.0

    def test_unstable_geometry(self, tmp_path):
        block = dict(CAVITY_BLOCK, mirror_curvature_mm=10.0)
        cfg = write_config(tmp_path, {"cavity": block})
        assert run("cavity", "--config", cfg, "--out", tmp_path / "o") == 2


class TestLinkCommand:
    def test_sweep_artifacts(self, tmp_path):
        cfg = write_config(tmp_path, {"link": LINK_BLOCK})
        out = tmp_path / "out"
        assert run("link", "--config", cfg, "--out", out) == 0

        lines = (out / "link_snr.csv").read_text().splitlines()
        assert lines[0] == ("distance_km,snr_noiseless,snr_ppktp_cavity,"
                            "snr_ppln_waveguide,"
                            "ratio_ppktp_cavity_over_ppln_waveguide")
        assert len(lines) == 202
        first = [float(c) for c in lines[1].split(",")]
        assert first[0] == 0.0
        assert first[1] == pytest.approx(3600.0, rel=1e-12)
        assert first[4] == pytest.approx(507.25 / 102.25, rel=1e-12)
        last = [float(c) for c in lines[-1].split(",")]
        assert last[0] == 200.0
        assert last[4] < first[4]

        payload = json.loads((out / "link.json").read_text())
        assert payload["chain_product"] is None
        noiseless = payload["budgets"]["noiseless"]
        assert noiseless["snr_at_zero"] == pytest.approx(3600.0, rel=1e-12)
        assert noiseless["distance_km_at_threshold"] \
            == pytest.approx(209.194, abs=1e-3)
        assert payload["budgets"]["ppktp_cavity"]["distance_km_at_threshold"] \
            == pytest.approx(208.4655, abs=1e-3)
        assert payload["budgets"]["ppktp_cavity"]["converter_noise_hz"] \
            == pytest.approx(101.25, rel=1e-12)

    def test_chain_fallback(self, tmp_path):
        block = json.loads(json.dumps(LINK_BLOCK))
        del block["budgets"][0]["eta_ext"]
        payload = {"link": block,
                   "efficiency_chain": [
                       {"label": "fiber_coupling", "factor": 0.72},
                       {"label": "optics", "factor": 0.99},
                       {"label": "bandpass", "factor": 0.92},
                       {"label": "grating", "factor": 0.70}]}
        cfg = write_config(tmp_path, payload)
        out = tmp_path / "out"
        assert run("link", "--config", cfg, "--out", out) == 0
        summary = json.loads((out / "link.json").read_text())
        assert summary["chain_product"] == pytest.approx(0.4590432, rel=1e-12)
        assert summary["budgets"]["noiseless"]["eta_ext"] \
            == pytest.approx(0.4590432, rel=1e-12)

    def test_schema_violation(self, tmp_path):
        block = json.loads(json.dumps(LINK_BLOCK))
        block["budgets"][0]["filter_transmission"] = 1.5
        cfg = write_config(tmp_path, {"link": block})
        assert run("link", "--config", cfg, "--out", tmp_path / "o") == 2


class TestBellCommand:
    def test_table_default_mode(self, tmp_path):
        cfg = write_config(tmp_path, {})
        out = tmp_path / "out"
        assert run("bell", "--config", cfg, "--out", out) == 0
        lines = (out / "bell_table.csv").read_text().splitlines()
        assert lines[0] == "n,s_lhv,s_qm,v_crit"
        assert len(lines) == 12  # n = 2..12
        n, s_lhv, s_qm, v_crit = lines[4].split(",")
        assert (int(n), float(s_lhv)) == (5, 9.0)
        assert float(s_qm) == pytest.approx(9.5106, abs=1e-4)
        assert float(v_crit) == pytest.approx(0.9463, abs=1e-4)

    def test_table_range(self, tmp_path):
        cfg = write_config(tmp_path,
                           {"bell": {"table_n_min": 3, "table_n_max": 6}})
        out = tmp_path / "out"
        assert run("bell", "--config", cfg, "--out", out) == 0
        lines = (out / "bell_table.csv").read_text().splitlines()
        assert [line.split(",")[0] for line in lines[1:]] == ["3", "4", "5", "6"]

    def test_table_bad_range(self, tmp_path):
        cfg = write_config(tmp_path,
                           {"bell": {"table_n_min": 6, "table_n_max": 3}})
        assert run("bell", "--config", cfg, "--out", tmp_path / "o") == 2

    def analyze_config(self, tmp_path, mutate=None):
        write_expectations(tmp_path / "terms.csv", mutate=mutate)
        return write_config(tmp_path, {"bell": {
            "n_settings": 5, "expectations_csv": "terms.csv"}})

    def test_analyze_model_terms(self, tmp_path):
        cfg = self.analyze_config(tmp_path)
        out = tmp_path / "out"
        assert run("bell", "--mode", "analyze", "--config", cfg,
                   "--out", out) == 0
        payload = json.loads((out / "bell_analysis.json").read_text())
        assert payload["n"] == 5
        assert payload["s"] == pytest.approx(9.28231, abs=1e-5)
        assert payload["sigma"] == pytest.approx(0.017, rel=1e-9)
        assert payload["significance"] == pytest.approx(16.6, abs=0.05)
        assert payload["violation"] is True
        assert payload["s_lhv"] == 9.0
        assert payload["v_crit"] == pytest.approx(9.0 / chained_bounds(5)[1],
                                                  rel=1e-12)

    def test_analyze_empty_cell(self, tmp_path, capsys):
        def blank_one(rows):
            rows[3][3] = ""
            return rows
        cfg = self.analyze_config(tmp_path, mutate=blank_one)
        assert run("bell", "--mode", "analyze", "--config", cfg,
                   "--out", tmp_path / "o") == 3
        assert "incomplete expectation set" in capsys.readouterr().err

    def test_analyze_missing_term(self, tmp_path):
        cfg = self.analyze_config(tmp_path, mutate=lambda rows: rows[:-1])
        assert run("bell", "--mode", "analyze", "--config", cfg,
                   "--out", tmp_path / "o") == 3

    def test_analyze_duplicate_term(self, tmp_path):
        cfg = self.analyze_config(tmp_path,
                                  mutate=lambda rows: rows + [rows[0]])
        assert run("bell", "--mode", "analyze", "--config", cfg,
                   "--out", tmp_path / "o") == 2

    def test_analyze_extra_term(self, tmp_path):
        def add_stray(rows):
            return rows + [[4, 1, 1, "0.5", "0.01"]]
        cfg = self.analyze_config(tmp_path, mutate=add_stray)
        assert run("bell", "--mode", "analyze", "--config", cfg,
                   "--out", tmp_path / "o") == 2

    def test_simulate_deterministic(self, tmp_path):
        cfg = write_config(tmp_path, {"bell": BELL_BLOCK})
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert run("bell", "--mode", "simulate", "--config", cfg,
                   "--out", out1) == 0
        assert run("bell", "--mode", "simulate", "--config", cfg,
                   "--out", out2) == 0
        for name in ("bell_simulation.json", "bell_counts.csv"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
        m1 = json.loads((out1 / "manifest.json").read_text())
        m2 = json.loads((out2 / "manifest.json").read_text())
        assert m1["files"] == m2["files"]
        assert m1["seed"] == 7

    def test_simulate_payload(self, tmp_path):
        cfg = write_config(tmp_path, {"bell": BELL_BLOCK})
        out = tmp_path / "out"
        assert run("bell", "--mode", "simulate", "--config", cfg,
                   "--out", out) == 0
        payload = json.loads((out / "bell_simulation.json").read_text())
        assert payload["model_s"] == pytest.approx(9.28231, abs=1e-5)
        assert len(payload["per_trial_s"]) == 10
        assert payload["mean_s"] > 9.0
        assert payload["significance"] > 10.0
        lines = (out / "bell_counts.csv").read_text().splitlines()
        assert lines[0] == ("trial,term,a_index,b_index,sign,"
                            "counts_at_phase,counts_at_phase_plus_pi")
        assert len(lines) == 1 + 10 * 10  # trials x 2N terms

    def test_seed_override_changes_samples(self, tmp_path):
        cfg = write_config(tmp_path, {"bell": BELL_BLOCK})
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert run("bell", "--mode", "simulate", "--config", cfg,
                   "--out", out1) == 0
        assert run("bell", "--mode", "simulate", "--config", cfg,
                   "--out", out2, "--seed", 8) == 0
        assert (out1 / "bell_counts.csv").read_bytes() \
            != (out2 / "bell_counts.csv").read_bytes()
        assert json.loads((out2 / "manifest.json").read_text())["seed"] == 8

    def test_simulate_needs_parameters(self, tmp_path):
        cfg = write_config(tmp_path, {"bell": {"n_settings": 5}})
        assert run("bell", "--mode", "simulate", "--config", cfg,
                   "--out", tmp_path / "o") == 2


class TestG2Command:
    def config(self, tmp_path, **g2_extra):
        write_histogram(tmp_path / "hist.csv")
        write_franson_scan(tmp_path / "scan.csv")
        payload = {
            "g2": dict({"histogram_csv": "hist.csv",
                        "integration_time_s": 100.0}, **g2_extra),
            "franson": {"scan_csv": "scan.csv",
                        "accidental_rate_hz": 15.3},
        }
        return write_config(tmp_path, payload)

    def test_artifacts(self, tmp_path):
        cfg = self.config(tmp_path)
        out = tmp_path / "out"
        assert run("g2", "--config", cfg, "--out", out) == 0
        payload = json.loads((out / "g2_franson.json").read_text())
        g2 = payload["g2"]
        assert g2["value"] == pytest.approx(310.45, rel=1e-12)
        assert g2["classical_bound"] == 2.0
        assert g2["significance"] == pytest.approx(
            (g2["value"] - 2.0) / g2["sigma"], rel=1e-12)
        assert g2["bins"] == 201
        assert g2["bin_width_s"] == pytest.approx(1e-12, rel=1e-9)

        for port in ("++", "+-", "-+", "--"):
            fit = payload["franson"][port]
            assert fit["corrected_visibility"] \
                == pytest.approx(0.982, rel=1e-6)
            assert fit["raw_visibility"] < 0.982
            assert fit["accidental_rate_hz"] == 15.3

    def test_per_port_accidental_map(self, tmp_path):
        cfg = self.config(tmp_path)
        payload = json.loads(cfg.read_text())
        payload["franson"]["accidental_rate_hz"] = {"++": 15.3, "+-": 0.0}
        cfg.write_text(json.dumps(payload))
        out = tmp_path / "out"
        assert run("g2", "--config", cfg, "--out", out) == 0
        result = json.loads((out / "g2_franson.json").read_text())
        assert result["franson"]["++"]["corrected_visibility"] \
            == pytest.approx(0.982, rel=1e-6)
        # no pedestal assumed on this port: correction is the identity
        assert result["franson"]["+-"]["corrected_visibility"] \
            == result["franson"]["+-"]["raw_visibility"]

    def test_mask_bins_config(self, tmp_path):
        write_franson_scan(tmp_path / "scan.csv")
        lines = ["delay_s,counts"]
        for i in range(201):
            count = 31045 if i == 100 else (5000 if i in (30, 170) else 100)
            lines.append(f"{(i - 100) * 1e-12!r},{count}")
        (tmp_path / "hist.csv").write_text("\n".join(lines) + "\n")
        payload = {
            "g2": {"histogram_csv": "hist.csv", "integration_time_s": 100.0,
                   "sidelobe_mask_bins": [30, 170]},
            "franson": {"scan_csv": "scan.csv"},
        }
        cfg = write_config(tmp_path, payload)
        out = tmp_path / "out"
        assert run("g2", "--config", cfg, "--out", out) == 0
        result = json.loads((out / "g2_franson.json").read_text())
        assert result["g2"]["value"] == pytest.approx(310.45, rel=1e-12)

    def test_malformed_histogram_header(self, tmp_path, capsys):
        cfg = self.config(tmp_path)
        (tmp_path / "hist.csv").write_text("delay,counts\n0,1\n1,1\n")
        assert run("g2", "--config", cfg, "--out", tmp_path / "o") == 2
        assert "missing column" in capsys.readouterr().err

    def test_non_numeric_cell(self, tmp_path):
        cfg = self.config(tmp_path)
        (tmp_path / "hist.csv").write_text("delay_s,counts\n0,xx\n1,1\n")
        assert run("g2", "--config", cfg, "--out", tmp_path / "o") == 2

    def test_flat_histogram_fails_numerically(self, tmp_path):
        # all-zero background defeats the normalizer: numerical, not config
        cfg = self.config(tmp_path)
        lines = ["delay_s,counts"]
        lines += [f"{(i - 100) * 1e-12!r},{50 if i == 100 else 0}"
                  for i in range(201)]
        (tmp_path / "hist.csv").write_text("\n".join(lines) + "\n")
        assert run("g2", "--config", cfg, "--out", tmp_path / "o") == 3


class TestEntryPoints:
    def test_env_var_config(self, tmp_path, monkeypatch):
        cfg = write_config(tmp_path, {"efficiency": {
            "p_max_w": 177.0,
            "power_grid_w": {"start": 0.0, "stop": 80.0, "num": 5}}})
        monkeypatch.setenv(CONFIG_ENV_VAR, str(cfg))
        out = tmp_path / "out"
        assert run("efficiency", "--out", out) == 0
        assert (out / "efficiency_curve.csv").exists()

    def test_no_config_anywhere(self, tmp_path, monkeypatch, capsys):
        monkeypatch.delenv(CONFIG_ENV_VAR, raising=False)
        assert run("efficiency", "--out", tmp_path / "o") == 2
        assert CONFIG_ENV_VAR in capsys.readouterr().err

    def test_output_dir_from_config(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        cfg = write_config(tmp_path, {
            "output_dir": str(tmp_path / "from_config"),
            "efficiency": {"p_max_w": 177.0,
                           "power_grid_w": {"start": 0.0, "stop": 80.0,
                                            "num": 5}}})
        assert run("efficiency", "--config", cfg) == 0
        assert (tmp_path / "from_config" / "manifest.json").exists()

    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["--version"])
        assert excinfo.value.code == 0
        assert capsys.readouterr().out.strip()

    def test_manifest_lists_artifacts(self, tmp_path):
        cfg = write_config(tmp_path, {"efficiency": {
            "p_max_w": 177.0,
            "power_grid_w": {"start": 0.0, "stop": 80.0, "num": 5}}})
        out = tmp_path / "out"
        assert run("efficiency", "--config", cfg, "--out", out) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert set(manifest["files"]) == {"efficiency_curve.csv",
                                          "efficiency.json"}
        assert manifest["tool_version"]
        assert manifest["config_sha256"]
