import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import flux_oracle
from sqzmag import gaussian_optics as go
from sqzmag import pipeline as pl
from sqzmag import vapor_cell as vc
from sqzmag.config import DensitySweepSpec, ExperimentConfig, SpectrumSpec, load_config

base = ExperimentConfig()


def small_spectrum(**kw):
    spec = dict(kind="magnetometer", temperature_C=25.0, fs_Hz=4e5, rbw_Hz=400.0, n_avg=300,
                band_Hz=(50e3, 190e3))
    spec.update(kw)
    return base.with_(spectrum=SpectrumSpec(**spec))


# --- sensitivity ---

def test_sql_rotation_noise_oracle():
    assert pl.sql_rotation_noise(6e-3) == pytest.approx(1 / (2 * np.sqrt(flux_oracle(6e-3))), rel=1e-12)
    assert pl.sql_rotation_noise(6e-3) == pytest.approx(3.2e-9, rel=0.05)


def test_two_db_floor_improves_field_by_1p26():
    a = pl.sensitivity(0.0, 6e-3, 300.0)
    b = pl.sensitivity(-2.0, 6e-3, 300.0)
    assert a.delta_B_T_per_rtHz / b.delta_B_T_per_rtHz == pytest.approx(10 ** 0.1, rel=1e-12)


@pytest.mark.parametrize("slope", [0.0, -1.0, float("nan")])
def test_sensitivity_needs_slope(slope):
    with pytest.raises(go.PhysicsDomainError):
        pl.sensitivity(0.0, 6e-3, slope)


@given(st.floats(-20, 40), st.floats(1e-5, 0.1), st.floats(1e-3, 1e6))
def test_sensitivity_identity(floor, power, slope):
    r = pl.sensitivity(floor, power, slope)
    assert r.delta_B_T_per_rtHz == r.noise_rad_per_rtHz / slope
    assert r.delta_B_T_per_rtHz * r.slope_rad_per_T == pytest.approx(r.noise_rad_per_rtHz, rel=1e-15)
    assert r.noise_rad_per_rtHz > 0 and r.delta_B_T_per_rtHz > 0


def test_best_sensitivity_in_picotesla_decade():
    res = pl.run_density_sweep(base)
    best = min(min(p.coherent.delta_B_T_per_rtHz, p.squeezed.delta_B_T_per_rtHz) for p in res.points)
    assert 1e-12 <= best <= 3e-12


# --- sweeps ---

def local_maxima(b, phi):
    i = np.where((phi[1:-1] > phi[:-2]) & (phi[1:-1] > phi[2:]))[0] + 1
    return b[i]


def test_b_sweep_defaults_show_narrow_feature():
    res = pl.run_b_sweep(base)
    c = res.curve
    assert res.temperature_C == 40.0
    peaks = local_maxima(c.b_values_T, c.phi_values_rad)
    peaks = peaks[peaks > 0]
    assert len(peaks) == 2
    # skew and the broad slope pull the narrow peak outward a little
    assert peaks[0] == pytest.approx(base.cell.narrow_width_T, rel=0.3)
    assert peaks[1] == pytest.approx(base.cell.broad_width_T, rel=0.2)
    assert peaks[1] / peaks[0] >= 10


def test_b_sweep_low_power_loses_narrow_feature():
    lo = pl.run_b_sweep(base.with_(power_W=0.5e-3)).curve
    _, narrow = vc.nmor_components(lo.b_values_T, base.cell, lo.density_cm3, lo.power_W)
    broad, _ = vc.nmor_components(lo.b_values_T, base.cell, lo.density_cm3, lo.power_W)
    assert np.max(np.abs(narrow)) < 1e-3 * np.max(np.abs(broad))


def test_b_sweep_antisymmetric():
    c = pl.run_b_sweep(base.with_(cell=base.cell.with_(asym=0.0))).curve
    np.testing.assert_allclose(c.phi_values_rad, -c.phi_values_rad[::-1], atol=1e-15)


def test_density_sweep_shapes():
    res = pl.run_density_sweep(base)
    t = res.column("transmission")
    slope = res.column("response_slope_rad_per_T")
    assert np.all(np.diff(t) < 0)
    assert np.argmax(slope) > 0
    supp = [p.suppression_dB[500e3] for p in res.points]
    assert supp[0] == pytest.approx(2.0, abs=0.35)
    assert supp[-1] < 0
    first, last = res.points[0], res.points[-1]
    assert first.squeezed.delta_B_T_per_rtHz < first.coherent.delta_B_T_per_rtHz
    assert last.squeezed.delta_B_T_per_rtHz >= last.coherent.delta_B_T_per_rtHz


def test_density_sweep_order_independent_of_pool():
    cfg = base.with_(density_sweep=DensitySweepSpec(temperatures_C=(50.0, 25.0, 35.0)))
    a = pl.run_density_sweep(cfg, max_workers=1)
    b = pl.run_density_sweep(cfg, max_workers=3)
    assert [p.temperature_C for p in b.points] == [50.0, 25.0, 35.0]
    assert a.column("floor_squeezed_dB").tolist() == b.column("floor_squeezed_dB").tolist()


def test_detection_frequency_override():
    a = pl.run_sensitivity(base)
    b = pl.run_sensitivity(base, 1e6)
    assert a.detection_freq_Hz == 500e3 and b.detection_freq_Hz == 1e6


def test_detected_power_and_rotation_slope():
    n = vc.vapor_density(40.0)
    t = vc.transmission(n, base.cell)
    assert pl.detected_power(base, n) == pytest.approx(6e-3 * t)
    assert pl.rotation_slope(base, n) == pytest.approx(vc.response_slope(base.cell, n, 6e-3) / t)


# --- spectra ---

def test_spectrum_chain_consistency():
    run = pl.run_spectrum(small_spectrum())
    for t in run.traces:
        assert t.measured_dB == pytest.approx(t.analytic_dB, abs=0.3)
    sep = run.trace("coherent").measured_dB - run.trace("squeezed").measured_dB
    assert sep == pytest.approx(2.0, abs=0.35)


def test_squeezing_off_gives_identical_traces():
    cfg = small_spectrum(n_avg=50).with_(squeeze=go.SqueezeParams(r=0.0, excess=1.0))
    run = pl.run_spectrum(cfg)
    np.testing.assert_array_equal(run.trace("squeezed").estimate.psd, run.trace("coherent").estimate.psd)


def test_spectrum_deterministic():
    cfg = small_spectrum(n_avg=20)
    a, b = pl.run_spectrum(cfg), pl.run_spectrum(cfg)
    np.testing.assert_array_equal(a.traces[0].estimate.psd, b.traces[0].estimate.psd)
    c = pl.run_spectrum(cfg.with_(seed=1))
    assert not np.array_equal(a.traces[0].estimate.psd, c.traces[0].estimate.psd)


def test_modulation_spike():
    cfg = small_spectrum(fs_Hz=5e3, rbw_Hz=2.0, n_avg=30, band_Hz=(300.0, 2000.0),
                         modulation_freq_Hz=220.0, modulation_field_T=1e-10)
    est = pl.run_spectrum(cfg).trace("squeezed").estimate
    k = np.argmin(np.abs(est.freqs_Hz - 220.0))
    assert est.psd_db_rel_sql[k] > 10.0


def test_detector_spectrum_labels():
    cfg = small_spectrum(kind="detector", powers_W=(1e-3, 2e-3), n_avg=20)
    run = pl.run_spectrum(cfg)
    assert [t.label for t in run.traces] == ["single_1mW", "single_2mW", "balanced_1mW",
                                             "balanced_2mW", "dark"]


def test_floor_grid_refines_peaks():
    g = pl.floor_grid(4e6, 28.6, [1.6e6], 100.0)
    near = g[np.abs(g - 1.6e6) < 2e3]
    assert len(near) > 200 and g.max() == 2e6 and np.all(np.diff(g) > 0)


# --- artifacts ---

def assert_table_round_trip(table, back_cols):
    for name, col in table.columns.items():
        for x, y in zip(col, back_cols[name]):
            if isinstance(x, (int, np.integer)):
                assert x == y
            elif isinstance(x, float):
                assert y == pytest.approx(x, rel=1e-12, abs=0)
            else:
                assert str(x) == str(y)


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_density_sweep_round_trip(tmp_path, fmt):
    res = pl.run_density_sweep(base)
    paths = pl.write_outputs(res, base, "density-sweep", tmp_path, fmt)
    tables = res.tables()
    for name, table in tables.items():
        path = tmp_path / f"{name}.{fmt}"
        assert path in paths
        if fmt == "csv":
            back = pl.read_csv_table(path)
        else:
            back, md = pl.read_json_table(path)
            assert md["config_sha256"] == base.config_hash() and md["seed"] == base.seed
        assert_table_round_trip(table, back)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["config_sha256"] == base.config_hash()


def test_spectrum_round_trip(tmp_path):
    run = pl.run_spectrum(small_spectrum(n_avg=20))
    pl.write_outputs(run, base, "spectrum", tmp_path, "json")
    back, _ = pl.read_json_table(tmp_path / "spectrum.json")
    np.testing.assert_array_equal(back["psd_dB_squeezed"], run.trace("squeezed").estimate.psd_db_rel_sql)
    assert back["freq_Hz"] == run.traces[0].estimate.freqs_Hz.tolist()


def test_svg_output(tmp_path):
    res = pl.run_b_sweep(base)
    paths = pl.write_outputs(res, base, "b-sweep", tmp_path, "svg")
    svg = (tmp_path / "b_sweep.svg").read_text()
    assert svg.startswith("<svg") and "polyline" in svg
    assert tmp_path / "b_sweep.csv" in paths


def test_config_hash_tracks_seed():
    assert base.config_hash() != base.with_(seed=5).config_hash()
    assert base.config_hash() == ExperimentConfig().config_hash()


def test_preset_runs_quickly():
    res = pl.run_b_sweep(load_config("fig3"))
    assert res.curve.slope_rad_per_T > 0
