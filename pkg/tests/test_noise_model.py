import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import flux_oracle
from sqzmag import gaussian_optics as go
from sqzmag import noise_model as nm
from sqzmag import vapor_cell as vc

cfg = nm.NoiseConfig()
cell = vc.CellParams()
sq = go.SqueezeParams()
pure = go.SqueezeParams(r=0.2303, excess=1.0)
off = go.SqueezeParams(r=0.0, excess=1.0)
P = 6e-3
N25, N70 = vc.vapor_density(25.0), vc.vapor_density(70.0)


def test_sql_scaling():
    assert nm.sql_psd(2 * P) / nm.sql_psd(P) == 2.0
    assert nm.sql_psd(4 * P) / nm.sql_psd(P) == 4.0
    assert nm.to_db(nm.sql_psd(P) / nm.sql_psd(P)) == 0.0
    assert nm.sql_psd(P) == pytest.approx(2 * flux_oracle(P), rel=1e-12)


def test_sql_needs_light():
    with pytest.raises(go.PhysicsDomainError):
        nm.sql_psd(0.0)


def test_single_detector_rin_doubles_as_power_squared():
    f = np.array([1e3, 1e5])
    abs1 = nm.rin_psd_abs(P, f, cfg)
    abs2 = nm.rin_psd_abs(2 * P, f, cfg)
    np.testing.assert_allclose(nm.to_db(abs2 / abs1), 20 * np.log10(2), atol=1e-12)


def test_balanced_is_cmrr_below_single():
    f = np.geomspace(10, 1e6, 20)
    diff = nm.rin_psd(P, f, cfg, balanced=True) - nm.rin_psd(P, f, cfg)
    np.testing.assert_allclose(diff, -25.0, atol=1e-12)


def test_balanced_residual_crossover_near_200khz():
    f_x = nm.rin_excess_crossover(P, cfg)
    assert 150e3 < f_x < 250e3
    f = np.array([0.5 * f_x, 2 * f_x])
    res = nm.rin_rel_sql(P, f, cfg, balanced=True)
    assert nm.to_db(1 + res[0]) > 0.1 > nm.to_db(1 + res[1])


def test_squeezer_spectrum_examples():
    assert nm.to_db(nm.squeezer_spectrum(100e3, pure, cfg)) == pytest.approx(-2.0, abs=0.01)
    assert nm.squeezer_spectrum(1e-3, pure, cfg) >= 1 - 1e-6
    np.testing.assert_array_equal(nm.squeezer_spectrum(np.geomspace(1, 1e7, 30), off, cfg), 1.0)


@given(st.floats(1e-2, 1e8))
def test_squeezing_band_in_unit_interval(f):
    assert 0 <= nm.squeezing_band(f, cfg) <= 1


def test_db_round_trip():
    x = np.geomspace(1e-6, 1e6, 100)
    np.testing.assert_allclose(nm.from_db(nm.to_db(x)), x, rtol=1e-12)
    d = np.linspace(-60, 60, 101)
    np.testing.assert_allclose(nm.to_db(nm.from_db(d)), d, atol=1e-12)


def test_low_density_squeezed_two_db_below_coherent():
    f = np.linspace(100e3, 1e6, 200)
    coh = nm.magnetometer_noise_floor(f, N25, P, "coherent", cfg, cell, sq)
    sqz = nm.magnetometer_noise_floor(f, N25, P, "squeezed", cfg, cell, sq)
    assert np.median(coh.psd_rel_sql_dB - sqz.psd_rel_sql_dB) == pytest.approx(2.0, abs=0.35)


def test_high_density_low_frequency_noise():
    f = np.array([200.0, 1e3])
    coh = nm.magnetometer_noise_floor(f, N70, P, "coherent", cfg, cell, sq)
    sqz = nm.magnetometer_noise_floor(f, N70, P, "squeezed", cfg, cell, sq)
    assert np.all(coh.psd_rel_sql_dB > 3.0)
    assert np.all(sqz.psd_rel_sql_dB >= coh.psd_rel_sql_dB)


def test_atomic_rin_rises_ten_db_at_seventy_celsius():
    assert nm.to_db(nm.atomic_rin_noise([200.0], N70, P, cell, cfg))[0] >= 10.0


def test_zero_density_is_bare_probe():
    f = np.geomspace(10, 3e6, 50)
    comps = nm.floor_components(f, 0.0, P, "squeezed", cfg, cell, sq)
    np.testing.assert_allclose(comps.quantum, nm.squeezer_spectrum(f, sq, cfg), rtol=1e-12)
    np.testing.assert_array_equal(comps.backaction, 0.0)
    np.testing.assert_array_equal(comps.atomic_rin, 0.0)


def test_zero_density_coherent_is_sql_above_rin_corner():
    f = np.linspace(2.2e6, 2.8e6, 20)
    fl = nm.magnetometer_noise_floor(f, 0.0, P, "coherent", cfg, cell, sq)
    np.testing.assert_allclose(fl.psd_rel_sql_dB, 0.0, atol=0.1)


def test_quantum_term_uses_optics_chain():
    eta = 0.6
    state = go.apply_loss(go.squeezed_probe(P, pure), eta)
    expected = go.analyzer_variance(state)
    assert nm.quantum_noise([200e3], "squeezed", pure, cfg, eta, P)[0] == pytest.approx(expected, rel=1e-6)


@given(st.floats(0.0, 1e12), st.floats(0.05, 1.0), st.floats(1e3, 4e6))
def test_without_backaction_squeezed_never_worse(n, eta, f):
    no_ba = nm.NoiseConfig(backaction_coeff=0.0)
    coh = nm.magnetometer_noise_floor([f], n, P, "coherent", no_ba, cell, sq, eta_optics=eta)
    sqz = nm.magnetometer_noise_floor([f], n, P, "squeezed", no_ba, cell, sq, eta_optics=eta)
    assert sqz.psd_rel_sql_dB[0] <= coh.psd_rel_sql_dB[0] + 1e-12


@given(st.floats(0.0, 1e12), st.floats(10.0, 4e6))
def test_rin_terms_identical_for_both_probes(n, f):
    a = nm.floor_components([f], n, P, "coherent", cfg, cell, off)
    b = nm.floor_components([f], n, P, "squeezed", cfg, cell, off)
    np.testing.assert_array_equal(a.common, b.common)
    np.testing.assert_allclose(a.total, b.total, rtol=1e-12)


def test_suppression_examples():
    temps = np.arange(25.0, 75.0, 5.0)
    ns = [vc.vapor_density(t) for t in temps]
    supp = nm.suppression_vs_density(ns, 500e3, P, cfg, cell, sq)
    values = np.array([s for _, s in supp])
    assert np.all(np.diff(values) < 0)
    assert np.all(values[np.array(ns) <= 4e10] >= 1.5)
    assert values[-1] < 0


def test_suppression_nearly_frequency_independent_at_low_density():
    vals = [nm.suppression_vs_density([N25], f, P, cfg, cell, sq)[0][1] for f in (100e3, 500e3, 1e6)]
    assert max(vals) - min(vals) < 0.2


def test_suppression_needs_densities():
    with pytest.raises(ValueError):
        nm.suppression_vs_density([], 500e3, P, cfg, cell, sq)


def test_window_stays_above_dc():
    grid = nm.window_grid(500.0, 2e3, 100)
    assert grid.min() > 0 and len(grid) == 100
    assert grid.max() - grid.min() == pytest.approx(2e3)


def test_detector_modes():
    f = np.array([1e3, 1e6])
    single = nm.detector_psd(P, f, cfg, "single")
    bal = nm.detector_psd(P, f, cfg, "balanced")
    dark = nm.detector_psd(P, f, cfg, "dark")
    assert np.all(single > bal) and np.all(bal > dark)
    with pytest.raises(ValueError):
        nm.detector_psd(P, f, cfg, "triple")


def test_floor_io_round_trip(tmp_path):
    fl = nm.magnetometer_noise_floor(np.geomspace(10, 1e6, 77), N25, P, "squeezed", cfg, cell, sq)
    fl.to_csv(tmp_path / "f.csv")
    back = nm.NoiseFloor.from_csv(tmp_path / "f.csv")
    np.testing.assert_array_equal(back.freqs_Hz, fl.freqs_Hz)
    np.testing.assert_array_equal(back.psd_rel_sql_dB, fl.psd_rel_sql_dB)
    fl.to_json(tmp_path / "f.json")
    back = nm.NoiseFloor.from_json(tmp_path / "f.json")
    np.testing.assert_array_equal(back.psd_rel_sql_dB, fl.psd_rel_sql_dB)
    assert back.metadata == fl.metadata


def test_floor_validation():
    with pytest.raises(ValueError):
        nm.NoiseFloor([1.0, 1.0], [0.0, 0.0])
    with pytest.raises(ValueError):
        nm.NoiseFloor([1.0, 2.0], [0.0, np.nan])
    with pytest.raises(go.PhysicsDomainError):
        nm.NoiseConfig(cmrr_dB=-1.0)
