"""Experiment configuration: INI files with one section per sub-system.

List values are comma separated; ``dark_peaks`` is written as
``freq:height_dB, freq:height_dB``. Every key is optional and falls back to
the module defaults. Unknown sections and keys are errors.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import gaussian_optics as go
from . import noise_model as nm
from . import vapor_cell as vc

PRESET_NAMES = ("fig2", "fig3", "fig4", "fig5a", "fig5b", "fig5c", "fig5d", "fig5e",
                "fig5f", "fig6", "fig7", "fig8")
OUTPUT_FORMATS = ("csv", "json", "svg")
SPECTRUM_KINDS = ("magnetometer", "detector")
DETECTOR_MODES = ("single", "balanced", "dark")


class ConfigError(ValueError):
    """One or more path-addressed configuration problems."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class BSweepSpec:
    b_min_T: float = -60e-6
    b_max_T: float = 60e-6
    n_points: int = 1201

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.b_min_T, self.b_max_T, self.n_points)


@dataclass(frozen=True)
class DensitySweepSpec:
    temperatures_C: tuple = tuple(float(t) for t in range(25, 75, 5))
    detection_freq_Hz: float = 500e3
    suppression_freqs_Hz: tuple = (1e3, 10e3, 100e3, 500e3, 1e6)
    window_Hz: float = 2e3
    window_points: int = 100


@dataclass(frozen=True)
class SpectrumSpec:
    kind: str = "magnetometer"
    temperature_C: float = 25.0
    fs_Hz: float = 2.5e6
    rbw_Hz: float = 28.6
    n_avg: int = 300
    band_Hz: tuple = (200e3, 1e6)
    modulation_freq_Hz: float = 0.0
    modulation_field_T: float = 0.0
    powers_W: tuple = (1.5e-3, 3e-3, 6e-3)
    modes: tuple = DETECTOR_MODES


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "default"
    seed: int = 0
    power_W: float = 6e-3
    wavelength_m: float = go.DEFAULT_WAVELENGTH_M
    eta_optics: float = 1.0
    squeeze: go.SqueezeParams = field(default_factory=go.SqueezeParams)
    cell: vc.CellParams = field(default_factory=vc.CellParams)
    noise: nm.NoiseConfig = field(default_factory=nm.NoiseConfig)
    b_sweep: BSweepSpec = field(default_factory=BSweepSpec)
    density_sweep: DensitySweepSpec = field(default_factory=DensitySweepSpec)
    spectrum: SpectrumSpec = field(default_factory=SpectrumSpec)
    output_dir: str = "out"
    output_format: str = "csv"

    def with_(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["noise"] = nm.config_dict(self.noise)
        return d

    def config_hash(self) -> str:
        """sha256 of the canonical JSON form; the seed is included."""
        blob = json.dumps(self.to_dict(), sort_keys=True, default=float)
        return hashlib.sha256(blob.encode()).hexdigest()


# --- value parsing --------------------------------------------------------

def _float_list(text: str) -> tuple:
    items = [t.strip() for t in text.split(",") if t.strip()]
    return tuple(float(t) for t in items)


def _str_list(text: str) -> tuple:
    return tuple(t.strip() for t in text.split(",") if t.strip())


def _peaks(text: str) -> tuple:
    out = []
    for item in _str_list(text):
        f, _, h = item.partition(":")
        out.append((float(f), float(h)))
    return tuple(out)


# (section, key) -> (target attribute, parser, (lo, hi) inclusive or None)
_INF = float("inf")
_SCHEMA = {
    "experiment": {
        "name": ("name", str, None),
        "seed": ("seed", int, (0, 2**63 - 1)),
    },
    "probe": {
        "power_W": ("power_W", float, (1e-9, 1.0)),
        "wavelength_m": ("wavelength_m", float, (1e-7, 1e-5)),
        "eta": ("eta_optics", float, (0.0, 1.0)),
    },
    "squeezer": {
        "r": ("r", float, (0.0, 3.0)),
        "theta_rad": ("theta_rad", float, (-2 * np.pi, 2 * np.pi)),
        "excess": ("excess", float, (1.0, 100.0)),
    },
    "cell": {
        "temperature_C": ("temperature_C", float, (vc.T_MIN_C, vc.T_MAX_C)),
        "length_m": ("length_m", float, (1e-4, 10.0)),
        "sigma_cm2": ("sigma_cm2", float, (1e-20, 1e-8)),
        "broad_width_T": ("broad_width_T", float, (1e-9, 1.0)),
        "narrow_width_T": ("narrow_width_T", float, (1e-12, 1.0)),
        "broad_amp_rad": ("broad_amp_rad", float, (0.0, 10.0)),
        "narrow_amp_rad": ("narrow_amp_rad", float, (0.0, 10.0)),
        "narrow_sat_power_W": ("narrow_sat_power_W", float, (1e-9, 1.0)),
        "narrow_gate_width_W": ("narrow_gate_width_W", float, (1e-9, 1.0)),
        "amp_sat_power_W": ("amp_sat_power_W", float, (1e-9, 1.0)),
        "asym": ("asym", float, (0.0, 0.999)),
        "bias_field_T": ("bias_field_T", float, (-1.0, 1.0)),
        "rin_coupling_gain": ("rin_coupling_gain", float, (0.0, 1e6)),
    },
    "noise": {
        "rin_level": ("rin_level", float, (0.0, 1e-3)),
        "rin_corner_Hz": ("rin_corner_Hz", float, (1e-3, 1e9)),
        "cmrr_dB": ("cmrr_dB", float, (0.0, 120.0)),
        "dark_peaks": ("dark_peaks", _peaks, None),
        "dark_peak_width_Hz": ("dark_peak_width_Hz", float, (1e-3, 1e9)),
        "dark_floor_dB": ("dark_floor_dB", float, (-200.0, 50.0)),
        "dark_ref_power_W": ("dark_ref_power_W", float, (1e-9, 1.0)),
        "squeezer_lf_corner_Hz": ("squeezer_lf_corner_Hz", float, (1e-3, 1e9)),
        "squeezer_hf_corner_Hz": ("squeezer_hf_corner_Hz", float, (1e-3, 1e12)),
        "backaction_coeff": ("backaction_coeff", float, (0.0, 100.0)),
    },
    "b_sweep": {
        "b_min_T": ("b_min_T", float, (-1.0, 1.0)),
        "b_max_T": ("b_max_T", float, (-1.0, 1.0)),
        "n_points": ("n_points", int, (2, 10**7)),
    },
    "density_sweep": {
        "temperatures_C": ("temperatures_C", _float_list, None),
        "detection_freq_Hz": ("detection_freq_Hz", float, (1e-3, 1e9)),
        "suppression_freqs_Hz": ("suppression_freqs_Hz", _float_list, None),
        "window_Hz": ("window_Hz", float, (1e-3, 1e9)),
        "window_points": ("window_points", int, (1, 10**6)),
    },
    "spectrum": {
        "kind": ("kind", str, None),
        "temperature_C": ("temperature_C", float, (vc.T_MIN_C, vc.T_MAX_C)),
        "fs_Hz": ("fs_Hz", float, (1.0, 1e9)),
        "rbw_Hz": ("rbw_Hz", float, (1e-3, 1e8)),
        "n_avg": ("n_avg", int, (1, 10**6)),
        "band_Hz": ("band_Hz", _float_list, None),
        "modulation_freq_Hz": ("modulation_freq_Hz", float, (0.0, 1e9)),
        "modulation_field_T": ("modulation_field_T", float, (0.0, 1.0)),
        "powers_W": ("powers_W", _float_list, None),
        "modes": ("modes", _str_list, None),
    },
    "output": {
        "dir": ("output_dir", str, None),
        "format": ("output_format", str, None),
    },
}


def _read_sections(text: str, source: str) -> dict:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keep key case
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError([f"{source}: {exc}"]) from exc
    return {s: dict(parser.items(s)) for s in parser.sections()}


def _parse_values(sections: dict) -> tuple[dict, list[str]]:
    parsed: dict = {s: {} for s in _SCHEMA}
    errors = []
    for section, items in sections.items():
        if section not in _SCHEMA:
            errors.append(f"[{section}]: unknown section (expected one of {sorted(_SCHEMA)})")
            continue
        schema = _SCHEMA[section]
        for key, raw in items.items():
            where = f"{section}.{key}"
            if key not in schema:
                errors.append(f"{where}: unknown key (expected one of {sorted(schema)})")
                continue
            attr, conv, rng = schema[key]
            try:
                value = conv(raw)
            except ValueError as exc:
                errors.append(f"{where}: cannot parse {raw!r} ({exc})")
                continue
            if rng is not None and not (rng[0] <= value <= rng[1]):
                errors.append(f"{where} = {value} is outside the legal range [{rng[0]}, {rng[1]}]")
                continue
            parsed[section][attr] = value
    return parsed, errors


def _check_temperature(where: str, t: float, errors: list[str]) -> None:
    try:
        vc.vapor_density(t)
    except go.PhysicsDomainError as exc:
        errors.append(f"{where}: {exc}")


def _build(parsed: dict, errors: list[str]) -> ExperimentConfig | None:
    def make(section, factory):
        try:
            return factory(**parsed[section])
        except (ValueError, TypeError) as exc:
            errors.append(f"[{section}]: {exc}")
            return None

    squeeze = make("squeezer", go.SqueezeParams)
    cell = make("cell", vc.CellParams)
    noise = make("noise", nm.NoiseConfig)
    b_sweep = make("b_sweep", BSweepSpec)
    dsweep = make("density_sweep", DensitySweepSpec)
    spectrum = make("spectrum", SpectrumSpec)

    if cell is not None:
        _check_temperature("cell.temperature_C", cell.temperature_C, errors)
    if b_sweep is not None and b_sweep.b_min_T >= b_sweep.b_max_T:
        errors.append("b_sweep: b_min_T must be below b_max_T")
    if dsweep is not None:
        if not dsweep.temperatures_C:
            errors.append("density_sweep.temperatures_C: sweep is empty")
        for i, t in enumerate(dsweep.temperatures_C):
            _check_temperature(f"density_sweep.temperatures_C[{i}]", t, errors)
        if any(f <= 0 for f in dsweep.suppression_freqs_Hz):
            errors.append("density_sweep.suppression_freqs_Hz: frequencies must be > 0")
    if spectrum is not None:
        _check_spectrum(spectrum, errors)
    fmt = parsed["output"].get("output_format", "csv")
    if fmt not in OUTPUT_FORMATS:
        errors.append(f"output.format = {fmt!r} is not one of {OUTPUT_FORMATS}")
    if errors:
        return None
    top = {**parsed["experiment"], **parsed["probe"], **parsed["output"]}
    return ExperimentConfig(squeeze=squeeze, cell=cell, noise=noise, b_sweep=b_sweep,
                            density_sweep=dsweep, spectrum=spectrum, **top)


def _check_spectrum(sp: SpectrumSpec, errors: list[str]) -> None:
    if sp.kind not in SPECTRUM_KINDS:
        errors.append(f"spectrum.kind = {sp.kind!r} is not one of {SPECTRUM_KINDS}")
    _check_temperature("spectrum.temperature_C", sp.temperature_C, errors)
    if len(sp.band_Hz) != 2 or not (0 <= sp.band_Hz[0] < sp.band_Hz[1]):
        errors.append("spectrum.band_Hz: expected 'lo, hi' with 0 <= lo < hi")
    elif sp.band_Hz[1] > sp.fs_Hz / 2:
        errors.append(f"spectrum.band_Hz: upper edge {sp.band_Hz[1]} Hz exceeds "
                      f"Nyquist ({sp.fs_Hz / 2} Hz)")
    if sp.rbw_Hz * 8 > sp.fs_Hz:
        errors.append("spectrum.rbw_Hz: resolution bandwidth too wide for fs_Hz")
    if sp.modulation_freq_Hz >= sp.fs_Hz / 2:
        errors.append("spectrum.modulation_freq_Hz: must lie below Nyquist")
    if not sp.powers_W or any(not (0 < p <= 1.0) for p in sp.powers_W):
        errors.append("spectrum.powers_W: expected a nonempty list of powers in (0, 1] W")
    bad = [m for m in sp.modes if m not in DETECTOR_MODES]
    if bad or not sp.modes:
        errors.append(f"spectrum.modes: entries must be drawn from {DETECTOR_MODES}")


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    """Parse and validate INI text; raises ``ConfigError`` listing every problem."""
    parsed, errors = _parse_values(_read_sections(text, source))
    cfg = _build(parsed, errors)
    if errors:
        raise ConfigError(errors)
    return cfg


def preset_path(name: str):
    return resources.files("sqzmag").joinpath("presets", f"{name}.ini")


def resolve_config_path(ref: str | Path):
    """A filesystem path, or the name of a shipped preset."""
    p = Path(ref)
    if p.is_file():
        return p
    if str(ref) in PRESET_NAMES:
        return preset_path(str(ref))
    raise ConfigError([f"{ref}: no such file or preset (presets: {', '.join(PRESET_NAMES)})"])


def load_config(ref: str | Path) -> ExperimentConfig:
    path = resolve_config_path(ref)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"{ref}: unreadable ({exc})"]) from exc
    return parse_config(text, str(ref))


@dataclass(frozen=True)
class ValidationReport:
    source: str
    errors: tuple = ()

    @property
    def ok(self) -> bool:
        return not self.errors

    def format(self) -> str:
        if self.ok:
            return f"{self.source}: valid"
        return "\n".join(f"{self.source}: {e}" for e in self.errors)


def validate_config(ref: str | Path) -> ValidationReport:
    """Full schema and physics-range check; never raises for bad content."""
    try:
        load_config(ref)
    except ConfigError as exc:
        return ValidationReport(str(ref), tuple(exc.errors))
    return ValidationReport(str(ref))
