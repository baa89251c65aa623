"""Spectrogram front-ends sharing one STFT framing.

All three kinds (MEL, GAM, CQT) weight the same power STFT with a
filterbank, so the branches stay frame-aligned:

    clip -> stft_power -> filterbank -> log_compress -> add_deltas
         -> standardize -> split_patches
"""

from __future__ import annotations

import functools
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import get_window

from .audio_io import AudioClip
from .errors import ConfigError, InputTooShortError, ValidationError

KINDS = ("MEL", "GAM", "CQT")

GAMMATONE_F_MIN = 40.0


@dataclass(frozen=True)
class FrontendConfig:
    kind: str = "MEL"
    fft_size: int = 8192
    window_size: int = 4096
    hop_size: int = 620
    n_bins: int = 128
    log_floor: float = 1e-10
    delta_width: int = 9
    cqt_bins_per_octave: int = 16
    cqt_f_min: Optional[float] = None
    standardize: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"frontend kind must be one of {KINDS}, got {self.kind!r}")
        if self.window_size < 1 or self.window_size > self.fft_size:
            raise ConfigError("window_size must be in [1, fft_size]")
        if self.hop_size < 1:
            raise ConfigError("hop_size must be >= 1")
        if self.n_bins < 1:
            raise ConfigError("n_bins must be >= 1")
        if self.log_floor <= 0:
            raise ConfigError("log_floor must be positive")
        if self.delta_width < 3 or self.delta_width % 2 == 0:
            raise ConfigError("delta_width must be an odd integer >= 3")
        if self.cqt_bins_per_octave < 1:
            raise ConfigError("cqt_bins_per_octave must be >= 1")

    def with_kind(self, kind: str) -> "FrontendConfig":
        return FrontendConfig(**{**asdict(self), "kind": kind})

    def cqt_min_frequency(self, sample_rate: float) -> float:
        if self.cqt_f_min is not None:
            return float(self.cqt_f_min)
        return (sample_rate / 2) / 2.0 ** (self.n_bins / self.cqt_bins_per_octave)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Spectrogram:
    """``values`` is [n_bins, n_frames, 3]: log energy, delta, delta-delta."""

    values: np.ndarray
    kind: str = "MEL"

    def __post_init__(self):
        if self.values.ndim != 3:
            raise ValidationError(f"spectrogram must be 3-d, got shape {self.values.shape}")

    @property
    def n_bins(self) -> int:
        return self.values.shape[0]

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]


@dataclass
class Patch:
    values: np.ndarray
    source_id: str = ""
    index: int = 0


def stft_power(clip: AudioClip, cfg: FrontendConfig) -> np.ndarray:
    """Power spectrogram [fft_size//2 + 1, n_frames] with a periodic Hann window.

    Frames start at multiples of ``hop_size`` with no centering padding, so
    ``n_frames = (len - window_size) // hop_size + 1``.
    """
    x = np.asarray(clip.samples, dtype=np.float64)
    if x.size < cfg.window_size:
        raise InputTooShortError(
            f"clip {clip.id!r} has {x.size} samples, fewer than one window ({cfg.window_size})"
        )
    frames = sliding_window_view(x, cfg.window_size)[:: cfg.hop_size]
    window = get_window("hann", cfg.window_size, fftbins=True)
    spec = np.fft.rfft(frames * window, n=cfg.fft_size, axis=1)
    return (spec.real ** 2 + spec.imag ** 2).T


def fft_frequencies(fft_size: int, sample_rate: float) -> np.ndarray:
    return np.arange(fft_size // 2 + 1) * (sample_rate / fft_size)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def _check_rows(bank: np.ndarray, name: str) -> np.ndarray:
    empty = np.flatnonzero(~np.any(bank > 0, axis=1))
    if empty.size:
        raise ConfigError(
            f"{name} filterbank has {empty.size} empty row(s) (first: {empty[0]}); "
            "n_bins is too large for the FFT resolution"
        )
    return bank


def _triangles(axis: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Triangles on ``axis``: row i rises over edges[i]..edges[i+1], falls to edges[i+2]."""
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    up = (axis[None, :] - lo) / (mid - lo)
    down = (hi - axis[None, :]) / (hi - mid)
    tri = np.minimum(up, down)
    # round-off from the scale round trip leaves ~1e-13 slivers at the band edges
    tri[tri < 1e-9] = 0.0
    return tri


def mel_center_frequencies(n_bins: int, sample_rate: float) -> np.ndarray:
    pts = mel_to_hz(np.linspace(0.0, hz_to_mel(sample_rate / 2), n_bins + 2))
    return pts[1:-1]


def mel_filterbank(cfg: FrontendConfig, sample_rate: float) -> np.ndarray:
    """Peak-1 triangular filters equally spaced on the mel scale over [0, Nyquist]."""
    edges = mel_to_hz(np.linspace(0.0, hz_to_mel(sample_rate / 2), cfg.n_bins + 2))
    bank = _triangles(fft_frequencies(cfg.fft_size, sample_rate), edges)
    return _check_rows(bank, "mel")


def erb(f):
    return 24.7 + np.asarray(f, dtype=np.float64) / 9.265


def hz_to_erb_rate(f):
    # integral of 1/erb(f) df
    return 9.265 * np.log1p(np.asarray(f, dtype=np.float64) / (24.7 * 9.265))


def erb_rate_to_hz(e):
    return 24.7 * 9.265 * np.expm1(np.asarray(e, dtype=np.float64) / 9.265)


def gammatone_center_frequencies(n_bins: int, sample_rate: float) -> np.ndarray:
    lo, hi = hz_to_erb_rate(GAMMATONE_F_MIN), hz_to_erb_rate(sample_rate / 2)
    return erb_rate_to_hz(np.linspace(lo, hi, n_bins))


def gammatone_response(freqs, center: float) -> np.ndarray:
    """Squared magnitude of a 4th-order gammatone filter, unnormalized."""
    b = 1.019 * erb(center)
    return (1.0 + ((np.asarray(freqs, dtype=np.float64) - center) / b) ** 2) ** -4


def gammatone_filterbank(cfg: FrontendConfig, sample_rate: float) -> np.ndarray:
    freqs = fft_frequencies(cfg.fft_size, sample_rate)
    centers = gammatone_center_frequencies(cfg.n_bins, sample_rate)
    bank = np.stack([gammatone_response(freqs, fc) for fc in centers])
    bank /= bank.max(axis=1, keepdims=True)
    return _check_rows(bank, "gammatone")


def cqt_center_frequencies(cfg: FrontendConfig, sample_rate: float) -> np.ndarray:
    f_min = cfg.cqt_min_frequency(sample_rate)
    return f_min * 2.0 ** (np.arange(cfg.n_bins) / cfg.cqt_bins_per_octave)


def cqt_filterbank(cfg: FrontendConfig, sample_rate: float) -> np.ndarray:
    """Triangles on a log2-frequency axis centred at f_min * 2**(k/B)."""
    f_min = cfg.cqt_min_frequency(sample_rate)
    B = cfg.cqt_bins_per_octave
    if f_min <= 0:
        raise ConfigError("cqt_f_min must be positive")
    if f_min * 2.0 ** (cfg.n_bins / B) > sample_rate / 2 * (1 + 1e-9):
        raise ConfigError(
            f"CQT geometry exceeds Nyquist: f_min={f_min:.3f} Hz with {cfg.n_bins} bins "
            f"at {B} bins/octave"
        )
    freqs = fft_frequencies(cfg.fft_size, sample_rate)
    log_axis = np.full(freqs.shape, -np.inf)
    log_axis[1:] = np.log2(freqs[1:])
    edges = np.log2(f_min) + np.arange(-1, cfg.n_bins + 1) / B
    bank = _triangles(log_axis, edges)
    return _check_rows(bank, "CQT")


@functools.lru_cache(maxsize=32)
def _cached_bank(cfg: FrontendConfig, sample_rate: float) -> np.ndarray:
    builder = {"MEL": mel_filterbank, "GAM": gammatone_filterbank, "CQT": cqt_filterbank}
    bank = builder[cfg.kind](cfg, sample_rate)
    bank.setflags(write=False)
    return bank


def filterbank(cfg: FrontendConfig, sample_rate: float) -> np.ndarray:
    """Filterbank matrix for ``cfg.kind``; cached and read-only."""
    return _cached_bank(cfg, float(sample_rate))


def cqt_spectrogram(clip: AudioClip, cfg: FrontendConfig) -> np.ndarray:
    return filterbank(cfg.with_kind("CQT"), clip.sample_rate) @ stft_power(clip, cfg)


def band_energies(clip: AudioClip, cfg: FrontendConfig) -> np.ndarray:
    """Filterbank power [n_bins, n_frames] for ``cfg.kind``."""
    return filterbank(cfg, clip.sample_rate) @ stft_power(clip, cfg)


def log_compress(power: np.ndarray, log_floor: float = 1e-10) -> np.ndarray:
    power = np.asarray(power, dtype=np.float64)
    if np.any(power < 0):
        raise ValidationError("log_compress expects nonnegative power values")
    return 10.0 * np.log10(power + log_floor)


def delta(values: np.ndarray, width: int = 9) -> np.ndarray:
    """Regression-slope delta along the last axis with edge replication."""
    half = width // 2
    n = values.shape[-1]
    pad = [(0, 0)] * (values.ndim - 1) + [(half, half)]
    padded = np.pad(values, pad, mode="edge")
    out = np.zeros_like(values, dtype=np.float64)
    for k in range(1, half + 1):
        out += k * (padded[..., half + k: half + k + n] - padded[..., half - k: half - k + n])
    return out / (2.0 * sum(k * k for k in range(1, half + 1)))


def add_deltas(spec2d: np.ndarray, delta_width: int = 9, kind: str = "MEL") -> Spectrogram:
    spec2d = np.asarray(spec2d, dtype=np.float64)
    if spec2d.ndim != 2:
        raise ValidationError(f"add_deltas expects a 2-d array, got shape {spec2d.shape}")
    if spec2d.shape[1] < delta_width:
        raise InputTooShortError(
            f"{spec2d.shape[1]} frames is fewer than the delta width {delta_width}"
        )
    d1 = delta(spec2d, delta_width)
    d2 = delta(d1, delta_width)
    return Spectrogram(np.stack([spec2d, d1, d2], axis=-1), kind)


def standardize(spec: Spectrogram, eps: float = 1e-8) -> Spectrogram:
    """Zero mean, unit variance per channel."""
    v = spec.values
    mean = v.mean(axis=(0, 1), keepdims=True)
    std = v.std(axis=(0, 1), keepdims=True)
    return Spectrogram((v - mean) / np.maximum(std, eps), spec.kind)


def compute_spectrogram(clip: AudioClip, cfg: FrontendConfig) -> Spectrogram:
    """Full front-end for one clip: filterbank power, dB, deltas, standardization."""
    logspec = log_compress(band_energies(clip, cfg), cfg.log_floor)
    spec = add_deltas(logspec, cfg.delta_width, cfg.kind)
    return standardize(spec) if cfg.standardize else spec


def patch_stride(patch_frames: int, overlap: float) -> int:
    return max(1, int(round(patch_frames * (1.0 - overlap))))


def split_patches(spec: Spectrogram, patch_frames: int = 128, overlap: float = 0.5,
                  source_id: str = "") -> list[Patch]:
    if patch_frames < 1:
        raise ValidationError("patch_frames must be >= 1")
    if not 0.0 <= overlap < 1.0:
        raise ValidationError(f"overlap must be in [0, 1), got {overlap}")
    if spec.n_frames < patch_frames:
        raise InputTooShortError(
            f"spectrogram has {spec.n_frames} frames, fewer than one patch ({patch_frames})"
        )
    stride = patch_stride(patch_frames, overlap)
    count = (spec.n_frames - patch_frames) // stride + 1
    return [
        Patch(spec.values[:, i * stride: i * stride + patch_frames, :], source_id, i)
        for i in range(count)
    ]
