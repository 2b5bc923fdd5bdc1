"""End-to-end experiment runs: response sweeps, density sweeps and spectra.

Chain: squeezer -> retarder -> magnetometer cell -> analyzer -> spectrum.
Rotations and sensitivities are referred to the light leaving the cell;
noise levels are relative to the shot noise of the detected power.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import gaussian_optics as go
from . import noise_model as nm
from . import spectrum_analyzer as sa
from . import vapor_cell as vc
from .config import ExperimentConfig
from .svgplot import line_plot

# floor-synthesis streams: classical part shared by both probes, quantum part
COMMON_STREAM = 0
QUANTUM_STREAM = 1
_DETECTOR_STREAM0 = 16
_LINEAR_FLOOR_MIN = 1e-30


def _workers() -> int:
    return max(1, min(8, os.cpu_count() or 1))


def parallel_map(func, items, max_workers: int | None = None) -> list:
    """Apply ``func`` to ``items`` in a thread pool; results keep input order."""
    items = list(items)
    if len(items) <= 1 or max_workers == 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=max_workers or _workers()) as pool:
        return list(pool.map(func, items))


# --- sensitivity ------------------------------------------------------------

@dataclass(frozen=True)
class SensitivityResult:
    density_cm3: float | None
    probe: str | None
    noise_rad_per_rtHz: float
    slope_rad_per_T: float
    delta_B_T_per_rtHz: float

    def as_row(self) -> dict:
        return {"density_cm3": self.density_cm3, "probe": self.probe,
                "noise_rad_per_rtHz": self.noise_rad_per_rtHz,
                "slope_rad_per_T": self.slope_rad_per_T,
                "delta_B_T_per_rtHz": self.delta_B_T_per_rtHz}


def sql_rotation_noise(power_W: float, wavelength_m: float = go.DEFAULT_WAVELENGTH_M) -> float:
    """Shot-noise-limited rotation amplitude density ``1/(2 sqrt(flux))`` (rad/rtHz)."""
    flux = go.photon_flux(power_W, wavelength_m)
    if flux <= 0:
        raise go.PhysicsDomainError(f"detected power must be > 0, got {power_W}")
    return 1.0 / (2.0 * np.sqrt(flux))


def sensitivity(floor_dB: float, power_W: float, slope_rad_per_T: float,
                density_cm3: float | None = None, probe: str | None = None,
                wavelength_m: float = go.DEFAULT_WAVELENGTH_M) -> SensitivityResult:
    """Field sensitivity from a noise floor (dB rel SQL) at detected power ``power_W``."""
    if not np.isfinite(slope_rad_per_T) or slope_rad_per_T <= 0:
        raise go.PhysicsDomainError(
            f"sensitivity undefined for slope {slope_rad_per_T} rad/T (needs > 0)")
    noise = sql_rotation_noise(power_W, wavelength_m) * 10.0 ** (float(floor_dB) / 20.0)
    return SensitivityResult(None if density_cm3 is None else float(density_cm3), probe,
                             float(noise), float(slope_rad_per_T),
                             float(noise / slope_rad_per_T))


def detected_power(cfg: ExperimentConfig, density_cm3: float) -> float:
    return cfg.power_W * vc.transmission(density_cm3, cfg.cell) * cfg.eta_optics


def rotation_slope(cfg: ExperimentConfig, density_cm3: float) -> float:
    """Rotation slope of the transmitted light (rad/T) at the operating point.

    The response signal scales with the transmitted power; dividing by the
    transmission recovers the rotation angle itself.
    """
    t = vc.transmission(density_cm3, cfg.cell)
    return vc.response_slope(cfg.cell, density_cm3, cfg.power_W) / t


def probe_sensitivity(cfg: ExperimentConfig, density_cm3: float, probe: str,
                      f_Hz: float) -> SensitivityResult:
    fl = nm.magnetometer_noise_floor([f_Hz], density_cm3, cfg.power_W, probe, cfg.noise,
                                     cfg.cell, cfg.squeeze, cfg.eta_optics, cfg.wavelength_m)
    return sensitivity(fl.psd_rel_sql_dB[0], detected_power(cfg, density_cm3),
                       rotation_slope(cfg, density_cm3), density_cm3, probe, cfg.wavelength_m)


# --- tabular output ---------------------------------------------------------

@dataclass
class Table:
    """Named columns of equal length, written as CSV or JSON."""

    columns: dict
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        lengths = {len(v) for v in self.columns.values()}
        if len(lengths) > 1:
            raise ValueError(f"ragged table columns: {lengths}")

    def __len__(self) -> int:
        return len(next(iter(self.columns.values()), []))

    def to_csv(self, path) -> None:
        names = list(self.columns)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(names)
            for i in range(len(self)):
                w.writerow([_cell(self.columns[n][i]) for n in names])

    def to_json(self, path) -> None:
        payload = {"metadata": self.metadata,
                   "columns": {k: [_jsonable(v) for v in col] for k, col in self.columns.items()}}
        Path(path).write_text(json.dumps(payload, indent=1))


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _jsonable(v):
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    return v


def _parse_cell(text: str):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def read_csv_table(path) -> dict:
    """Read a table written by ``Table.to_csv`` back into typed columns."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    names, body = rows[0], rows[1:]
    return {n: [_parse_cell(r[i]) for r in body] for i, n in enumerate(names)}


def read_json_table(path) -> tuple[dict, dict]:
    payload = json.loads(Path(path).read_text())
    return payload["columns"], payload["metadata"]


# --- results ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BSweepResult:
    curve: vc.ResponseCurve
    temperature_C: float

    def tables(self) -> dict:
        c = self.curve
        return {"b_sweep": Table({"B_T": c.b_values_T.tolist(), "phi_rad": c.phi_values_rad.tolist()},
                                 {"slope_rad_per_T": c.slope_rad_per_T,
                                  "operating_field_T": c.operating_field_T,
                                  "density_cm3": c.density_cm3, "power_W": c.power_W,
                                  "temperature_C": self.temperature_C})}

    def figures(self) -> dict:
        c = self.curve
        label = f"{self.temperature_C:g} C, {c.power_W * 1e3:g} mW"
        return {"b_sweep": line_plot([(label, c.b_values_T * 1e6, c.phi_values_rad * 1e3)],
                                     "B (uT)", "rotation (mrad)", "Magnetometer response")}


@dataclass(frozen=True)
class DensityPoint:
    temperature_C: float
    density_cm3: float
    transmission: float
    response_slope_rad_per_T: float
    rotation_slope_rad_per_T: float
    floor_coherent_dB: float
    floor_squeezed_dB: float
    suppression_dB: dict
    coherent: SensitivityResult
    squeezed: SensitivityResult


@dataclass(frozen=True, eq=False)
class DensitySweepResult:
    points: tuple
    detection_freq_Hz: float

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(p, name) for p in self.points])

    def tables(self) -> dict:
        pts = self.points
        main = {
            "temperature_C": [p.temperature_C for p in pts],
            "density_cm3": [p.density_cm3 for p in pts],
            "transmission": [p.transmission for p in pts],
            "response_slope_rad_per_T": [p.response_slope_rad_per_T for p in pts],
            "floor_coherent_dB": [p.floor_coherent_dB for p in pts],
            "floor_squeezed_dB": [p.floor_squeezed_dB for p in pts],
            "deltaB_coherent_T_per_rtHz": [p.coherent.delta_B_T_per_rtHz for p in pts],
            "deltaB_squeezed_T_per_rtHz": [p.squeezed.delta_B_T_per_rtHz for p in pts],
        }
        freqs = list(pts[0].suppression_dB) if pts else []
        supp = {"density_cm3": main["density_cm3"]}
        for f in freqs:
            supp[f"suppression_dB_at_{f:g}Hz"] = [p.suppression_dB[f] for p in pts]
        md = {"detection_freq_Hz": self.detection_freq_Hz}
        return {"density_sweep": Table(main, md), "suppression": Table(supp, md)}

    def figures(self) -> dict:
        n = self.column("density_cm3")
        slope = self.column("response_slope_rad_per_T")
        out = {
            "response_vs_density": line_plot(
                [("response (norm.)", n, slope / slope.max()),
                 ("transmission", n, self.column("transmission"))],
                "density (cm^-3)", "normalized", "Response and transmission"),
            "sensitivity_vs_density": line_plot(
                [("squeezed", n, [p.squeezed.delta_B_T_per_rtHz * 1e12 for p in self.points]),
                 ("coherent", n, [p.coherent.delta_B_T_per_rtHz * 1e12 for p in self.points])],
                "density (cm^-3)", "dB (pT/rtHz)",
                f"Sensitivity at {self.detection_freq_Hz:g} Hz"),
        }
        freqs = list(self.points[0].suppression_dB)
        out["suppression_vs_density"] = line_plot(
            [(f"{f:g} Hz", n, [p.suppression_dB[f] for p in self.points]) for f in freqs],
            "density (cm^-3)", "suppression (dB)", "Noise suppression")
        return out


@dataclass(frozen=True, eq=False)
class SpectrumTrace:
    label: str
    estimate: sa.SpectrumEstimate
    analytic: nm.NoiseFloor
    measured_dB: float
    analytic_dB: float


@dataclass(frozen=True, eq=False)
class SpectrumRun:
    kind: str
    traces: tuple
    band_Hz: tuple

    def trace(self, label: str) -> SpectrumTrace:
        for t in self.traces:
            if t.label == label:
                return t
        raise KeyError(label)

    def tables(self) -> dict:
        est = self.traces[0].estimate
        cols = {"freq_Hz": est.freqs_Hz.tolist()}
        for t in self.traces:
            cols[f"psd_dB_{t.label}"] = t.estimate.psd_db_rel_sql.tolist()
        summary = {
            "trace": [t.label for t in self.traces],
            "measured_floor_dB": [t.measured_dB for t in self.traces],
            "analytic_floor_dB": [t.analytic_dB for t in self.traces],
        }
        md = {"kind": self.kind, "band_Hz": list(self.band_Hz), "rbw_Hz": est.rbw_Hz,
              "n_avg": est.n_avg, "fs_Hz": est.fs_Hz}
        return {"spectrum": Table(cols, md), "spectrum_summary": Table(summary, md)}

    def figures(self) -> dict:
        traces = [(t.label, t.estimate.freqs_Hz[1:], t.estimate.psd_db_rel_sql[1:])
                  for t in self.traces]
        return {"spectrum": line_plot(traces, "frequency (Hz)", "PSD (dB rel SQL)",
                                      f"{self.kind} noise spectrum", logx=True)}


@dataclass(frozen=True, eq=False)
class SensitivityRun:
    results: tuple
    detection_freq_Hz: float
    temperature_C: float

    def tables(self) -> dict:
        rows = [r.as_row() for r in self.results]
        cols = {k: [r[k] for r in rows] for k in rows[0]}
        return {"sensitivity": Table(cols, {"detection_freq_Hz": self.detection_freq_Hz,
                                            "temperature_C": self.temperature_C})}

    def figures(self) -> dict:
        return {}


# --- runs -------------------------------------------------------------------

def run_b_sweep(cfg: ExperimentConfig) -> BSweepResult:
    """Rotation versus longitudinal field at the cell temperature and probe power."""
    n = cfg.cell.density_cm3
    curve = vc.response_curve(cfg.b_sweep.values, cfg.cell, n, cfg.power_W)
    return BSweepResult(curve, cfg.cell.temperature_C)


def _density_point(cfg: ExperimentConfig, temperature_C: float, f_det: float) -> DensityPoint:
    ds = cfg.density_sweep
    n = vc.vapor_density(temperature_C)
    t = vc.transmission(n, cfg.cell)
    coh = probe_sensitivity(cfg, n, "coherent", f_det)
    sqz = probe_sensitivity(cfg, n, "squeezed", f_det)
    supp = {}
    for f in ds.suppression_freqs_Hz:
        supp[float(f)] = nm.suppression_vs_density(
            [n], f, cfg.power_W, cfg.noise, cfg.cell, cfg.squeeze, ds.window_Hz,
            ds.window_points, cfg.eta_optics)[0][1]
    p_det = detected_power(cfg, n)
    floor_c = 20 * np.log10(coh.noise_rad_per_rtHz / sql_rotation_noise(p_det, cfg.wavelength_m))
    floor_s = 20 * np.log10(sqz.noise_rad_per_rtHz / sql_rotation_noise(p_det, cfg.wavelength_m))
    return DensityPoint(float(temperature_C), n, t,
                        vc.response_slope(cfg.cell, n, cfg.power_W),
                        coh.slope_rad_per_T, float(floor_c), float(floor_s), supp, coh, sqz)


def run_density_sweep(cfg: ExperimentConfig, detection_freq_Hz: float | None = None,
                      max_workers: int | None = None) -> DensitySweepResult:
    """Per-temperature response, transmission, floors, suppression and sensitivity."""
    f_det = float(detection_freq_Hz or cfg.density_sweep.detection_freq_Hz)
    temps = cfg.density_sweep.temperatures_C
    if not temps:
        raise ValueError("density sweep has no temperatures")
    pts = parallel_map(lambda t: _density_point(cfg, t, f_det), temps, max_workers)
    return DensitySweepResult(tuple(pts), f_det)


def run_sensitivity(cfg: ExperimentConfig, detection_freq_Hz: float | None = None) -> SensitivityRun:
    f_det = float(detection_freq_Hz or cfg.density_sweep.detection_freq_Hz)
    n = cfg.cell.density_cm3
    res = tuple(probe_sensitivity(cfg, n, p, f_det) for p in nm.PROBE_KINDS)
    return SensitivityRun(res, f_det, cfg.cell.temperature_C)


def floor_grid(fs_Hz: float, rbw_Hz: float, peaks=(), peak_width_Hz: float = 100.0,
               n_log: int = 4000) -> np.ndarray:
    """Frequency grid for analytic floors: log-spaced, refined around narrow peaks."""
    # content below one resolution bandwidth is not resolved anyway
    lo = max(rbw_Hz, fs_Hz * 1e-7)
    parts = [np.geomspace(lo, fs_Hz / 2, n_log)]
    for f0 in peaks:
        if lo < f0 < fs_Hz / 2:
            parts.append(np.linspace(f0 - 20 * peak_width_Hz, f0 + 20 * peak_width_Hz, 401))
    grid = np.unique(np.concatenate(parts))
    return grid[(grid >= lo) & (grid <= fs_Hz / 2)]


def _floor(freqs, linear, meta=None) -> nm.NoiseFloor:
    return nm.NoiseFloor.from_linear(freqs, np.maximum(linear, _LINEAR_FLOOR_MIN), meta)


def _band_median_dB(floor: nm.NoiseFloor, est: sa.SpectrumEstimate, band) -> float:
    f = est.freqs_Hz[est.band(band)]
    return float(nm.to_db(np.median(np.interp(f, floor.freqs_Hz, floor.linear))))


def _magnetometer_spectrum(cfg: ExperimentConfig) -> SpectrumRun:
    sp = cfg.spectrum
    n = vc.vapor_density(sp.temperature_C)
    grid = floor_grid(sp.fs_Hz, sp.rbw_Hz, [p[0] for p in cfg.noise.dark_peaks],
                      cfg.noise.dark_peak_width_Hz)
    p_det = detected_power(cfg, n)
    sql = sql_rotation_noise(p_det, cfg.wavelength_m) ** 2
    n_samples = sa.required_samples(sp.fs_Hz, sp.rbw_Hz, sp.n_avg)
    duration = n_samples / sp.fs_Hz
    modulation = None
    if sp.modulation_freq_Hz > 0 and sp.modulation_field_T > 0:
        amp = rotation_slope(cfg, n) * sp.modulation_field_T
        modulation = (sp.modulation_freq_Hz, amp)

    comps = {p: nm.floor_components(grid, n, cfg.power_W, p, cfg.noise, cfg.cell, cfg.squeeze,
                                    cfg.eta_optics, cfg.wavelength_m) for p in ("squeezed", "coherent")}
    common = sa.synthesize(_floor(grid, comps["coherent"].common), sp.fs_Hz, duration, cfg.seed,
                           modulation, sql, COMMON_STREAM)
    traces = []
    for probe in ("squeezed", "coherent"):
        c = comps[probe]
        quantum = sa.synthesize(_floor(grid, c.probe_specific), sp.fs_Hz, duration, cfg.seed,
                                None, sql, QUANTUM_STREAM)
        series = sa.TimeSeries(common.samples + quantum.samples, sp.fs_Hz, cfg.seed, sql,
                               {"probe": probe})
        del quantum
        est = sa.welch_psd(series, sp.rbw_Hz, sp.n_avg)
        analytic = _floor(grid, c.total, {"probe": probe, "density_cm3": n})
        traces.append(SpectrumTrace(probe, est, analytic, sa.band_floor(est, sp.band_Hz),
                                    _band_median_dB(analytic, est, sp.band_Hz)))
    return SpectrumRun("magnetometer", tuple(traces), tuple(sp.band_Hz))


def _detector_trace(cfg: ExperimentConfig, job) -> SpectrumTrace:
    index, mode, power = job
    sp = cfg.spectrum
    grid = floor_grid(sp.fs_Hz, sp.rbw_Hz, [p[0] for p in cfg.noise.dark_peaks],
                      cfg.noise.dark_peak_width_Hz)
    ref = nm.sql_psd(cfg.noise.dark_ref_power_W, cfg.wavelength_m)
    lin = nm.detector_psd(power, grid, cfg.noise, mode, cfg.wavelength_m) / ref
    label = "dark" if mode == "dark" else f"{mode}_{power * 1e3:g}mW"
    floor = _floor(grid, lin, {"mode": mode, "power_W": power})
    duration = sa.required_samples(sp.fs_Hz, sp.rbw_Hz, sp.n_avg) / sp.fs_Hz
    series = sa.synthesize(floor, sp.fs_Hz, duration, cfg.seed, None, 1.0,
                           _DETECTOR_STREAM0 + index)
    est = sa.welch_psd(series, sp.rbw_Hz, sp.n_avg)
    return SpectrumTrace(label, est, floor, sa.band_floor(est, sp.band_Hz),
                         _band_median_dB(floor, est, sp.band_Hz))


def _detector_spectrum(cfg: ExperimentConfig, max_workers: int | None) -> SpectrumRun:
    """Bare-laser detector spectra; levels are dB relative to the shot noise
    of ``noise.dark_ref_power_W`` so traces at different powers compare directly."""
    jobs = []
    for mode in cfg.spectrum.modes:
        powers = [0.0] if mode == "dark" else cfg.spectrum.powers_W
        for p in powers:
            jobs.append((len(jobs), mode, p))
    traces = parallel_map(lambda j: _detector_trace(cfg, j), jobs, max_workers)
    return SpectrumRun("detector", tuple(traces), tuple(cfg.spectrum.band_Hz))


def run_spectrum(cfg: ExperimentConfig, max_workers: int | None = None) -> SpectrumRun:
    """Simulated analyzer spectra for both probes (or for the bare detector)."""
    if cfg.spectrum.kind == "detector":
        return _detector_spectrum(cfg, max_workers)
    return _magnetometer_spectrum(cfg)


# --- writing ----------------------------------------------------------------

def provenance(cfg: ExperimentConfig, command: str) -> dict:
    return {"command": command, "config_name": cfg.name, "config_sha256": cfg.config_hash(),
            "seed": cfg.seed}


def write_outputs(result, cfg: ExperimentConfig, command: str, out_dir, fmt: str = "csv") -> list[Path]:
    """Write a result's tables (CSV or JSON) or figures (SVG, plus CSV data).

    A ``manifest.json`` with the config hash and seed accompanies every run.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    prov = provenance(cfg, command)
    written = []
    for name, table in result.tables().items():
        table.metadata = {**table.metadata, **prov}
        if fmt == "json":
            path = out / f"{name}.json"
            table.to_json(path)
        else:
            path = out / f"{name}.csv"
            table.to_csv(path)
        written.append(path)
    if fmt == "svg":
        for name, svg in result.figures().items():
            path = out / f"{name}.svg"
            path.write_text(svg)
            written.append(path)
    manifest = {**prov, "format": fmt, "files": [p.name for p in written]}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1))
    return written + [out / "manifest.json"]
