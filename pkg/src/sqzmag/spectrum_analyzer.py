"""Time-domain detector output synthesis and Welch PSD estimation.

PSDs are one-sided. A time series carries ``sql_level``, the PSD (in its
own units^2/Hz) that corresponds to 0 dB relative to the shot-noise limit.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .noise_model import NoiseFloor, to_db

HANN_ENBW_BINS = 1.5
# samples per synthesis block; bounds peak memory for long records
DEFAULT_BLOCK = 1 << 22
# segments per FFT batch in the Welch accumulator
_BATCH_SAMPLES = 1 << 23


class InsufficientDataError(ValueError):
    """The record is too short for the requested RBW and averaging."""


@dataclass(frozen=True, eq=False)
class TimeSeries:
    samples: np.ndarray
    fs_Hz: float
    seed: int | None = None
    sql_level: float = 1.0
    meta: dict = field(default_factory=dict)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.fs_Hz

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True, eq=False)
class SpectrumEstimate:
    freqs_Hz: np.ndarray
    psd: np.ndarray
    rbw_Hz: float
    n_avg: int
    fs_Hz: float
    sql_level: float = 1.0
    meta: dict = field(default_factory=dict)

    @property
    def df_Hz(self) -> float:
        return float(self.freqs_Hz[1] - self.freqs_Hz[0])

    @property
    def psd_db_rel_sql(self) -> np.ndarray:
        return to_db(self.psd / self.sql_level)

    def band(self, band_Hz) -> np.ndarray:
        lo, hi = band_Hz
        return (self.freqs_Hz >= lo) & (self.freqs_Hz <= hi)

    def to_csv(self, path) -> None:
        rel = self.psd_db_rel_sql
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["freq_Hz", "psd", "psd_dB_rel_sql"])
            for f, p, d in zip(self.freqs_Hz, self.psd, rel):
                w.writerow([repr(float(f)), repr(float(p)), repr(float(d))])

    def metadata(self) -> dict:
        return {"rbw_Hz": self.rbw_Hz, "n_avg": self.n_avg, "fs_Hz": self.fs_Hz,
                "sql_level": self.sql_level, **self.meta}

    def to_json(self, path) -> None:
        payload = {"metadata": self.metadata(), "freq_Hz": self.freqs_Hz.tolist(),
                   "psd": self.psd.tolist()}
        Path(path).write_text(json.dumps(payload, indent=1))

    @classmethod
    def from_json(cls, path) -> "SpectrumEstimate":
        payload = json.loads(Path(path).read_text())
        md = dict(payload["metadata"])
        known = {k: md.pop(k) for k in ("rbw_Hz", "n_avg", "fs_Hz", "sql_level")}
        return cls(np.asarray(payload["freq_Hz"]), np.asarray(payload["psd"]),
                   known["rbw_Hz"], int(known["n_avg"]), known["fs_Hz"],
                   known["sql_level"], md)


def _rng(seed, stream: int, block: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(stream, block))
    return np.random.Generator(np.random.PCG64(ss))


def _target_psd(floor: NoiseFloor, bin_freqs: np.ndarray, sql_level: float) -> np.ndarray:
    psd = np.interp(bin_freqs, floor.freqs_Hz, floor.linear) * sql_level
    psd[bin_freqs == 0] = 0.0
    return psd


def synthesize(floor: NoiseFloor, fs_Hz: float, duration_s: float, seed: int,
               modulation: tuple[float, float] | None = None, sql_level: float = 1.0,
               stream: int = 0, block_size: int = DEFAULT_BLOCK) -> TimeSeries:
    """Gaussian noise whose one-sided PSD follows ``floor`` (times ``sql_level``).

    White noise is colored in the frequency domain, block by block; each
    block draws from its own generator keyed by ``(seed, stream, block)``,
    so identical arguments reproduce the record bit for bit. ``modulation``
    adds a sinusoid ``(frequency_Hz, amplitude)``.
    """
    f_max = float(np.max(floor.freqs_Hz))
    if fs_Hz < 2 * f_max:
        raise ValueError(f"fs {fs_Hz} Hz undersamples the floor (needs >= {2 * f_max} Hz)")
    if modulation is not None and modulation[0] >= fs_Hz / 2:
        raise ValueError(f"modulation at {modulation[0]} Hz is above Nyquist for fs {fs_Hz} Hz")
    n_total = int(round(fs_Hz * duration_s))
    if n_total < 2:
        raise ValueError("duration too short for a single sample pair")
    f_min = float(floor.freqs_Hz[floor.freqs_Hz > 0].min()) if np.any(floor.freqs_Hz > 0) else 0.0
    if f_min > 0 and duration_s < 10.0 / f_min:
        warnings.warn(f"duration {duration_s} s is shorter than 10 periods of {f_min} Hz",
                      RuntimeWarning, stacklevel=2)
    out = np.empty(n_total)
    cache: dict[int, np.ndarray] = {}
    for b, start in enumerate(range(0, n_total, block_size)):
        m = min(block_size, n_total - start)
        if m not in cache:
            bins = np.fft.rfftfreq(m, 1.0 / fs_Hz)
            cache[m] = np.sqrt(_target_psd(floor, bins, sql_level) * fs_Hz / 2.0)
        white = _rng(seed, stream, b).standard_normal(m)
        out[start:start + m] = np.fft.irfft(np.fft.rfft(white) * cache[m], n=m)
    if modulation is not None:
        f_mod, amp = modulation
        t = np.arange(n_total) / fs_Hz
        out += amp * np.sin(2 * np.pi * f_mod * t)
    return TimeSeries(out, float(fs_Hz), seed, float(sql_level), {"stream": stream})


def segment_length(fs_Hz: float, rbw_Hz: float) -> int:
    """Hann segment length whose equivalent noise bandwidth is ``rbw_Hz``."""
    return max(8, int(round(HANN_ENBW_BINS * fs_Hz / rbw_Hz)))


def required_samples(fs_Hz: float, rbw_Hz: float, n_avg: int) -> int:
    nperseg = segment_length(fs_Hz, rbw_Hz)
    return nperseg + (n_avg - 1) * (nperseg // 2)


def welch_psd(series: TimeSeries, rbw_Hz: float, n_avg: int) -> SpectrumEstimate:
    """Averaged Hann-windowed periodogram with 50 % overlap.

    Exactly ``n_avg`` segments are used (the first ones in the record).
    Segment sums are accumulated per batch and the batch sums combined with
    numpy's pairwise summation.
    """
    if n_avg < 1:
        raise ValueError("n_avg must be >= 1")
    fs = series.fs_Hz
    nperseg = segment_length(fs, rbw_Hz)
    step = nperseg // 2
    need = required_samples(fs, rbw_Hz, n_avg)
    if len(series) < need:
        raise InsufficientDataError(
            f"rbw {rbw_Hz} Hz with {n_avg} averages needs at least {need / fs:.6g} s "
            f"({need} samples), record has {series.duration_s:.6g} s"
        )
    win = np.hanning(nperseg + 1)[:-1]  # periodic Hann
    scale = 2.0 / (fs * np.sum(win * win))
    x = np.asarray(series.samples, dtype=float)
    frames = np.lib.stride_tricks.sliding_window_view(x[:need], nperseg)[::step]
    per_batch = max(1, _BATCH_SAMPLES // nperseg)
    partial = []
    for first in range(0, n_avg, per_batch):
        seg = frames[first:first + per_batch]
        seg = seg - seg.mean(axis=1, keepdims=True)
        spec = np.fft.rfft(seg * win, axis=1)
        partial.append(np.sum(spec.real**2 + spec.imag**2, axis=0))
    acc = np.sum(np.stack(partial), axis=0)
    psd = acc * scale / n_avg
    psd[0] /= 2.0
    if nperseg % 2 == 0:
        psd[-1] /= 2.0
    freqs = np.fft.rfftfreq(nperseg, 1.0 / fs)
    rbw = fs * np.sum(win * win) / np.sum(win) ** 2
    return SpectrumEstimate(freqs, psd, float(rbw), int(n_avg), float(fs),
                            series.sql_level, {"seed": series.seed})


def welch_dof(n_avg: int) -> float:
    """Equivalent chi-square degrees of freedom of a Hann / 50 % overlap average."""
    rho = 1.0 / 6.0  # Hann correlation between half-overlapped segments
    if n_avg == 1:
        return 2.0
    return 2.0 * n_avg / (1.0 + 2.0 * rho**2 * (1.0 - 1.0 / n_avg))


def band_floor(estimate: SpectrumEstimate, band_Hz) -> float:
    """Median PSD in ``band_Hz`` in dB relative to the estimate's SQL level.

    The median of a chi-square-distributed estimate sits below its mean; the
    Wilson-Hilferty factor for the averaging's degrees of freedom undoes that.
    """
    lo, hi = band_Hz
    if hi > estimate.fs_Hz / 2 or lo < 0:
        raise ValueError(f"band {band_Hz} outside [0, Nyquist={estimate.fs_Hz / 2}]")
    mask = estimate.band(band_Hz)
    if not np.any(mask):
        raise ValueError(f"band {band_Hz} contains no frequency bins")
    nu = welch_dof(estimate.n_avg)
    bias = (1.0 - 2.0 / (9.0 * nu)) ** 3
    return float(to_db(np.median(estimate.psd[mask]) / bias / estimate.sql_level))


def measure_floor(series: TimeSeries, rbw_Hz: float, n_avg: int, band_Hz) -> float:
    """Spike-robust noise floor (dB rel SQL) of ``series`` over ``band_Hz``."""
    return band_floor(welch_psd(series, rbw_Hz, n_avg), band_Hz)
