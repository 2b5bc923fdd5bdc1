"""Spectral noise budget of the balanced-detection magnetometer.

Every floor is expressed relative to the shot-noise level of the light that
actually reaches the detector. Arithmetic is done on linear power ratios;
decibels appear only at the boundary (``to_db`` / ``from_db``).
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import gaussian_optics as go
from . import vapor_cell as vc

PROBE_KINDS = ("coherent", "squeezed")


def to_db(x):
    return 10.0 * np.log10(x)


def from_db(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


@dataclass(frozen=True)
class NoiseConfig:
    """Classical and excess noise parameters.

    ``rin_level`` is the laser's relative intensity noise (1/Hz) on its white
    plateau; below ``rin_corner_Hz`` it rises as 1/f. ``dark_peaks`` holds
    ``(frequency_Hz, height_dB)`` electronic spikes whose heights are quoted
    relative to the shot noise of ``dark_ref_power_W``.
    """

    probe: str = "squeezed"
    rin_level: float = 1.5338e-16
    rin_corner_Hz: float = 200e3
    cmrr_dB: float = 25.0
    dark_peaks: tuple = ((60e3, 12.0), (1.6e6, 8.0), (3.1e6, 6.0))
    dark_peak_width_Hz: float = 100.0
    dark_floor_dB: float = -30.0
    dark_ref_power_W: float = 6e-3
    squeezer_lf_corner_Hz: float = 100.0
    squeezer_hf_corner_Hz: float = 5e6
    backaction_coeff: float = 0.0126

    def __post_init__(self):
        if self.probe not in PROBE_KINDS:
            raise ValueError(f"probe must be one of {PROBE_KINDS}, got {self.probe!r}")
        if self.cmrr_dB < 0:
            raise go.PhysicsDomainError(f"cmrr_dB must be >= 0, got {self.cmrr_dB}")
        if self.rin_level < 0:
            raise go.PhysicsDomainError(f"rin_level must be >= 0, got {self.rin_level}")
        if self.backaction_coeff < 0:
            raise go.PhysicsDomainError("backaction_coeff must be >= 0")
        for name in ("rin_corner_Hz", "squeezer_lf_corner_Hz", "squeezer_hf_corner_Hz",
                     "dark_peak_width_Hz", "dark_ref_power_W"):
            if getattr(self, name) <= 0:
                raise go.PhysicsDomainError(f"{name} must be > 0")
        object.__setattr__(self, "dark_peaks",
                           tuple((float(f), float(h)) for f, h in self.dark_peaks))


@dataclass(eq=False)
class NoiseFloor:
    freqs_Hz: np.ndarray
    psd_rel_sql_dB: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.freqs_Hz = np.asarray(self.freqs_Hz, dtype=float)
        self.psd_rel_sql_dB = np.asarray(self.psd_rel_sql_dB, dtype=float)
        if self.freqs_Hz.shape != self.psd_rel_sql_dB.shape or self.freqs_Hz.ndim != 1:
            raise ValueError("freqs_Hz and psd_rel_sql_dB must be 1-D and equally long")
        if not np.all(np.isfinite(self.psd_rel_sql_dB)):
            raise ValueError("noise floor has non-finite values")
        if np.any(np.diff(self.freqs_Hz) <= 0):
            raise ValueError("frequency grid must be strictly increasing")

    @property
    def linear(self) -> np.ndarray:
        return from_db(self.psd_rel_sql_dB)

    @classmethod
    def from_linear(cls, freqs_Hz, psd_linear, metadata=None) -> "NoiseFloor":
        return cls(freqs_Hz, to_db(np.asarray(psd_linear, dtype=float)), dict(metadata or {}))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["freq_Hz", "psd_dB_rel_sql"])
            for f, p in zip(self.freqs_Hz, self.psd_rel_sql_dB):
                w.writerow([repr(float(f)), repr(float(p))])

    @classmethod
    def from_csv(cls, path, metadata=None) -> "NoiseFloor":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1], dict(metadata or {}))

    def to_json(self, path) -> None:
        payload = {
            "metadata": self.metadata,
            "freq_Hz": self.freqs_Hz.tolist(),
            "psd_dB_rel_sql": self.psd_rel_sql_dB.tolist(),
        }
        Path(path).write_text(json.dumps(payload, indent=1))

    @classmethod
    def from_json(cls, path) -> "NoiseFloor":
        payload = json.loads(Path(path).read_text())
        return cls(payload["freq_Hz"], payload["psd_dB_rel_sql"], payload.get("metadata", {}))


def sql_psd(power_W: float, wavelength_m: float = go.DEFAULT_WAVELENGTH_M) -> float:
    """One-sided shot-noise PSD of the detected photon rate, ``2*flux`` (1/s^2/Hz)."""
    if not power_W > 0:
        raise go.PhysicsDomainError(f"shot noise needs power > 0, got {power_W}")
    return 2.0 * go.photon_flux(power_W, wavelength_m)


def rin_shape(f_Hz, cfg: NoiseConfig):
    """Relative intensity noise spectrum (1/Hz): white plateau with a 1/f rise."""
    f = np.asarray(f_Hz, dtype=float)
    if np.any(f <= 0):
        raise ValueError("RIN is defined for f > 0 only")
    return cfg.rin_level * (1.0 + cfg.rin_corner_Hz / f)


def rin_psd_abs(power_W: float, f_Hz, cfg: NoiseConfig, balanced: bool = False,
                wavelength_m: float = go.DEFAULT_WAVELENGTH_M):
    """Absolute intensity-noise PSD of the photon rate (same units as ``sql_psd``)."""
    flux = go.photon_flux(power_W, wavelength_m)
    psd = 2.0 * flux**2 * rin_shape(f_Hz, cfg)
    if balanced:
        psd = psd * from_db(-cfg.cmrr_dB)
    return psd


def rin_rel_sql(power_W: float, f_Hz, cfg: NoiseConfig, balanced: bool = False,
                wavelength_m: float = go.DEFAULT_WAVELENGTH_M):
    """Intensity noise relative to shot noise at the same power (linear)."""
    if power_W <= 0:
        return np.zeros_like(np.asarray(f_Hz, dtype=float))
    return rin_psd_abs(power_W, f_Hz, cfg, balanced, wavelength_m) / sql_psd(power_W, wavelength_m)


def rin_psd(power_W: float, f_Hz, cfg: NoiseConfig, balanced: bool = False,
            wavelength_m: float = go.DEFAULT_WAVELENGTH_M):
    """Intensity noise in dB relative to the shot noise at ``power_W``."""
    return to_db(rin_rel_sql(power_W, f_Hz, cfg, balanced, wavelength_m))


def dark_rel_sql(f_Hz, power_W: float, cfg: NoiseConfig):
    """Detector electronic noise (floor + Lorentzian spikes) relative to SQL at ``power_W``."""
    f = np.asarray(f_Hz, dtype=float)
    ref = np.full_like(f, from_db(cfg.dark_floor_dB))
    g = cfg.dark_peak_width_Hz
    for f0, h_db in cfg.dark_peaks:
        ref = ref + from_db(h_db) * g * g / ((f - f0) ** 2 + g * g)
    if power_W <= 0:
        return np.full_like(f, np.inf)
    return ref * (cfg.dark_ref_power_W / power_W)


def detector_psd(power_W: float, f_Hz, cfg: NoiseConfig, mode: str = "balanced",
                 wavelength_m: float = go.DEFAULT_WAVELENGTH_M):
    """Absolute detector output PSD for a bare laser beam.

    ``mode`` is ``"single"`` (one photodiode blocked), ``"balanced"`` or
    ``"dark"`` (no light). Units are those of ``sql_psd``; the dark level is
    referenced to the shot noise of ``cfg.dark_ref_power_W``.
    """
    f = np.asarray(f_Hz, dtype=float)
    dark = dark_rel_sql(f, cfg.dark_ref_power_W, cfg) * sql_psd(cfg.dark_ref_power_W, wavelength_m)
    if mode == "dark":
        return dark
    if mode not in ("single", "balanced"):
        raise ValueError(f"unknown detector mode {mode!r}")
    shot = sql_psd(power_W, wavelength_m)
    return shot + rin_psd_abs(power_W, f, cfg, mode == "balanced", wavelength_m) + dark


def squeezing_band(f_Hz, cfg: NoiseConfig):
    """Fraction of the squeezer's noise modification surviving at ``f_Hz``.

    Second-order high-pass at the low-frequency corner, fourth-order
    roll-off at the upper edge.
    """
    f = np.asarray(f_Hz, dtype=float)
    if np.any(f <= 0):
        raise ValueError("squeezer spectrum is defined for f > 0 only")
    hp = 1.0 / (1.0 + (cfg.squeezer_lf_corner_Hz / f) ** 2)
    lp = 1.0 / (1.0 + (f / cfg.squeezer_hf_corner_Hz) ** 4)
    return hp * lp


def squeezer_spectrum(f_Hz, squeeze: go.SqueezeParams, cfg: NoiseConfig):
    """Squeezed-quadrature variance (rel SQL) of the squeezer output vs frequency.

    Outside its band the squeezer output relaxes to vacuum, which is the same
    as a vacuum-admixing loss with transmission equal to the band factor.
    """
    band = squeezing_band(f_Hz, cfg)
    return 1.0 + band * (squeeze.min_variance - 1.0)


def antisqueezer_spectrum(f_Hz, squeeze: go.SqueezeParams, cfg: NoiseConfig):
    band = squeezing_band(f_Hz, cfg)
    return 1.0 + band * (squeeze.max_variance - 1.0)


def quantum_noise(f_Hz, probe: str, squeeze: go.SqueezeParams, cfg: NoiseConfig,
                  eta: float, power_W: float = 6e-3,
                  wavelength_m: float = go.DEFAULT_WAVELENGTH_M):
    """Balanced-detector quantum noise (rel SQL) after transmission ``eta``.

    The in-band value is propagated through the Gaussian chain
    (probe -> loss -> 45 degree analyzer); outside the band the squeezer
    output is mixed with vacuum, which commutes with the loss.
    """
    f = np.asarray(f_Hz, dtype=float)
    if probe == "coherent":
        return np.ones_like(f)
    if probe != "squeezed":
        raise ValueError(f"unknown probe kind {probe!r}")
    state = go.squeezed_probe(max(power_W, 1e-9), squeeze, wavelength_m)
    in_band = go.analyzer_variance(go.apply_loss(state, eta))
    return 1.0 + squeezing_band(f, cfg) * (in_band - 1.0)


def backaction_noise(f_Hz, density_cm3: float, squeeze: go.SqueezeParams, cfg: NoiseConfig):
    """Phase-insensitive excess noise of the squeezed probe caused by the atoms."""
    anti = antisqueezer_spectrum(f_Hz, squeeze, cfg)
    return cfg.backaction_coeff * (density_cm3 / vc.REF_DENSITY_CM3) * (anti - 1.0)


def atomic_rin_noise(f_Hz, density_cm3: float, power_W: float, cell: vc.CellParams,
                     cfg: NoiseConfig, eta_optics: float = 1.0,
                     wavelength_m: float = go.DEFAULT_WAVELENGTH_M):
    """x-polarization intensity noise converted into rotation noise by the atoms.

    Rotation noise ``kappa^2 * RIN(f)`` referred to the shot-noise rotation
    noise of the detected light. ``kappa`` is measured against the input
    power so the detected shot noise is rescaled by the cell transmission.
    """
    f = np.asarray(f_Hz, dtype=float)
    kappa = vc.rin_coupling(density_cm3, power_W, cell)
    if kappa == 0.0:
        return np.zeros_like(f)
    t = vc.transmission(density_cm3, cell) * eta_optics
    flux_in = go.photon_flux(power_W, wavelength_m)
    return 4.0 * flux_in * kappa**2 * rin_shape(f, cfg) / t


@dataclass(frozen=True, eq=False)
class FloorComponents:
    """Linear (rel SQL) contributions to a magnetometer noise floor."""

    freqs_Hz: np.ndarray
    quantum: np.ndarray
    backaction: np.ndarray
    atomic_rin: np.ndarray
    balanced_rin: np.ndarray
    dark: np.ndarray

    @property
    def common(self) -> np.ndarray:
        """Classical part shared by both probe kinds."""
        return self.atomic_rin + self.balanced_rin + self.dark

    @property
    def probe_specific(self) -> np.ndarray:
        return self.quantum + self.backaction

    @property
    def total(self) -> np.ndarray:
        return self.probe_specific + self.common


def floor_components(f_Hz, density_cm3: float, power_W: float, probe: str,
                     cfg: NoiseConfig, cell: vc.CellParams, squeeze: go.SqueezeParams,
                     eta_optics: float = 1.0,
                     wavelength_m: float = go.DEFAULT_WAVELENGTH_M) -> FloorComponents:
    f = np.asarray(f_Hz, dtype=float)
    if density_cm3 < 0:
        raise go.PhysicsDomainError("density must be >= 0")
    if probe not in PROBE_KINDS:
        raise ValueError(f"unknown probe kind {probe!r}")
    eta = vc.transmission(density_cm3, cell) * eta_optics
    p_det = power_W * eta
    quantum = quantum_noise(f, probe, squeeze, cfg, eta, power_W, wavelength_m)
    if probe == "squeezed" and density_cm3 > 0:
        ba = backaction_noise(f, density_cm3, squeeze, cfg)
    else:
        ba = np.zeros_like(f)
    atomic = atomic_rin_noise(f, density_cm3, power_W, cell, cfg, eta_optics, wavelength_m)
    bal = rin_rel_sql(p_det, f, cfg, balanced=True, wavelength_m=wavelength_m)
    dark = dark_rel_sql(f, p_det, cfg)
    return FloorComponents(f, quantum, ba, atomic, bal, dark)


def magnetometer_noise_floor(f_Hz, density_cm3: float, power_W: float, probe: str,
                             cfg: NoiseConfig, cell: vc.CellParams,
                             squeeze: go.SqueezeParams | None = None,
                             eta_optics: float = 1.0,
                             wavelength_m: float = go.DEFAULT_WAVELENGTH_M) -> NoiseFloor:
    """Noise floor (dB rel SQL of the detected light) of the magnetometer output."""
    squeeze = squeeze or go.SqueezeParams()
    comps = floor_components(f_Hz, density_cm3, power_W, probe, cfg, cell, squeeze,
                             eta_optics, wavelength_m)
    meta = {"probe": probe, "density_cm3": float(density_cm3), "power_W": float(power_W)}
    return NoiseFloor.from_linear(comps.freqs_Hz, comps.total, meta)


def window_grid(f_Hz: float, window_Hz: float = 2e3, n_points: int = 100) -> np.ndarray:
    """``n_points`` frequencies spanning ``window_Hz`` around ``f_Hz``, kept above DC."""
    lo = max(f_Hz - window_Hz / 2, window_Hz / n_points)
    return np.linspace(lo, lo + window_Hz, n_points)


def suppression_vs_density(densities_cm3, f_Hz: float, power_W: float, cfg: NoiseConfig,
                           cell: vc.CellParams, squeeze: go.SqueezeParams,
                           window_Hz: float = 2e3, n_points: int = 100,
                           eta_optics: float = 1.0) -> list[tuple[float, float]]:
    """Coherent-minus-squeezed floor (dB), averaged over a window around ``f_Hz``.

    Positive values mean the squeezed probe has the lower noise floor.
    """
    densities = list(densities_cm3)
    if not densities:
        raise ValueError("density list is empty")
    grid = window_grid(f_Hz, window_Hz, n_points)
    out = []
    for n in densities:
        coh = magnetometer_noise_floor(grid, n, power_W, "coherent", cfg, cell, squeeze, eta_optics)
        sq = magnetometer_noise_floor(grid, n, power_W, "squeezed", cfg, cell, squeeze, eta_optics)
        out.append((float(n), float(np.mean(coh.psd_rel_sql_dB - sq.psd_rel_sql_dB))))
    return out


def rin_excess_crossover(power_W: float, cfg: NoiseConfig, threshold_dB: float = 0.1) -> float:
    """Frequency below which balanced-detection noise exceeds SQL by ``threshold_dB``."""
    excess = from_db(threshold_dB) - 1.0
    plateau = float(rin_rel_sql(power_W, 1e300, cfg, balanced=True))
    if plateau >= excess:
        return float("inf")
    # plateau * (1 + fc/f) = excess
    return cfg.rin_corner_Hz / (excess / plateau - 1.0)


def config_dict(cfg: NoiseConfig) -> dict:
    d = asdict(cfg)
    d["dark_peaks"] = [list(p) for p in cfg.dark_peaks]
    return d
