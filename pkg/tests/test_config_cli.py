import json
import os
import subprocess
import sys

import pytest

from sqzmag import cli
from sqzmag.config import (PRESET_NAMES, ConfigError, ExperimentConfig, load_config,
                           parse_config, validate_config)


def write(tmp_path, text, name="exp.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_presets_valid(name):
    assert validate_config(name).ok


def test_empty_file_gives_defaults(tmp_path):
    cfg = load_config(write(tmp_path, ""))
    assert cfg.config_hash() == ExperimentConfig().config_hash()


def test_eta_out_of_range(tmp_path):
    report = validate_config(write(tmp_path, "[probe]\neta = 1.3\n"))
    assert not report.ok
    msg = report.errors[0]
    assert "probe.eta" in msg and "[0.0, 1.0]" in msg


def test_temperature_domain_error_has_context(tmp_path):
    report = validate_config(write(tmp_path, "[density_sweep]\ntemperatures_C = 25, 300\n"))
    assert not report.ok
    assert any("density_sweep.temperatures_C[1]" in e and "vapor-curve domain" in e
               for e in report.errors)


def test_unknown_keys_and_sections(tmp_path):
    report = validate_config(write(tmp_path, "[probe]\npowr_W = 1\n[extra]\nx = 1\n"))
    assert any("probe.powr_W: unknown key" in e for e in report.errors)
    assert any("[extra]: unknown section" in e for e in report.errors)


def test_unparseable_value(tmp_path):
    report = validate_config(write(tmp_path, "[spectrum]\nn_avg = many\n"))
    assert any(e.startswith("spectrum.n_avg: cannot parse") for e in report.errors)


def test_missing_file():
    report = validate_config("/nonexistent/x.ini")
    assert not report.ok and "no such file" in report.errors[0]


def test_lists_and_peaks_parse():
    cfg = parse_config("[noise]\ndark_peaks = 1e3:5, 2e3:7.5\n[spectrum]\nband_Hz = 10, 20\n"
                       "powers_W = 1e-3, 2e-3\n")
    assert cfg.noise.dark_peaks == ((1e3, 5.0), (2e3, 7.5))
    assert cfg.spectrum.band_Hz == (10.0, 20.0)


def test_empty_sweep_rejected():
    with pytest.raises(ConfigError, match="empty"):
        parse_config("[density_sweep]\ntemperatures_C = \n")


def test_band_above_nyquist_rejected():
    with pytest.raises(ConfigError, match="Nyquist"):
        parse_config("[spectrum]\nfs_Hz = 1e5\nband_Hz = 1e3, 6e4\n")


def test_fig6_preset_contents():
    cfg = load_config("fig6")
    assert cfg.spectrum.rbw_Hz == 0.9 and cfg.spectrum.modulation_freq_Hz == 220.0
    assert cfg.spectrum.temperature_C == 35.0 and cfg.noise.cmrr_dB == 50.0


# --- CLI ---

def test_cli_validate_exit_codes(tmp_path, capsys):
    assert cli.main(["validate", "--config", "fig3"]) == 0
    bad = write(tmp_path, "[probe]\neta = 1.3\n")
    assert cli.main(["validate", "--config", str(bad)]) == 2
    assert "probe.eta" in capsys.readouterr().out


def test_cli_config_error_exit_code(tmp_path, capsys):
    bad = write(tmp_path, "[cell]\ntemperature_C = 300\n")
    assert cli.main(["b-sweep", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert "cell.temperature_C" in capsys.readouterr().err


def test_cli_runtime_error_exit_code(tmp_path, capsys):
    # zero slope: no narrow resonance and no atoms to speak of
    cfg = write(tmp_path, "[cell]\ntemperature_C = -20\nbroad_amp_rad = 0\nnarrow_amp_rad = 0\n")
    assert cli.main(["sensitivity", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3
    assert "slope" in capsys.readouterr().err


def test_cli_b_sweep_writes_outputs(tmp_path):
    out = tmp_path / "run"
    assert cli.main(["b-sweep", "--config", "fig3", "--out", str(out), "--seed", "17"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 17
    assert manifest["config_sha256"] == load_config("fig3").with_(seed=17).config_hash()
    assert (out / "b_sweep.svg").exists() and (out / "b_sweep.csv").exists()


def test_cli_density_sweep_json_and_detection_freq(tmp_path):
    out = tmp_path / "ds"
    assert cli.main(["density-sweep", "--config", "fig8", "--out", str(out), "--format", "json",
                     "--detection-freq", "1e6"]) == 0
    payload = json.loads((out / "density_sweep.json").read_text())
    assert payload["metadata"]["detection_freq_Hz"] == 1e6
    assert len(payload["columns"]["density_cm3"]) == 10


def test_cli_bad_detection_freq(tmp_path):
    assert cli.main(["sensitivity", "--config", "fig8", "--out", str(tmp_path),
                     "--detection-freq", "-5"]) == 2


def test_cli_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    assert cli.main(["sensitivity", "--config", "fig8"]) == 0
    assert (tmp_path / "env" / "sensitivity.csv").exists()


def test_console_script_entry_point(tmp_path):
    env = {**os.environ, cli.OUT_ENV: str(tmp_path)}
    proc = subprocess.run([sys.executable, "-m", "sqzmag.cli", "validate", "--config", "fig2"],
                          capture_output=True, text=True, env=env)
    assert proc.returncode == 0 and "valid" in proc.stdout
