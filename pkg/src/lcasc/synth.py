"""Synthetic corpora: labelled patches for fast training checks and WAV recordings for pipeline runs."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .audio_io import AudioClip, ManifestEntry, write_manifest, write_wav
from .frontend import Spectrogram, add_deltas, standardize

SYNTH_LABELS = ("low_hum", "mid_band", "high_hiss")
SYNTH_DEVICES = ("A", "B", "S4")


def toy_patches(n: int = 300, n_classes: int = 3, shape=(32, 32), seed: int = 0,
                band_gain: float = 3.0, noise: float = 1.0):
    """Patches [n, bins, frames, 3] whose class is a raised frequency band plus Gaussian noise.

    The band rows for class ``c`` are the c-th of ``n_classes`` equal slices
    of the frequency axis. Labels are balanced and shuffled.
    """
    rng = np.random.default_rng(seed)
    n_bins, n_frames = shape
    edges = np.linspace(0, n_bins, n_classes + 1).astype(int)
    labels = rng.permutation(np.arange(n) % n_classes)
    out = np.empty((n, n_bins, n_frames, 3), dtype=np.float32)
    for i, c in enumerate(labels):
        base = noise * rng.standard_normal((n_bins, n_frames))
        base[edges[c]:edges[c + 1]] += band_gain
        spec = standardize(add_deltas(base, 9))
        out[i] = spec.values
    return out, labels


def _band_noise(rng, n_samples, sample_rate, lo, hi):
    spectrum = np.fft.rfft(rng.standard_normal(n_samples))
    freqs = np.fft.rfftfreq(n_samples, 1.0 / sample_rate)
    spectrum[(freqs < lo) | (freqs > hi)] = 0.0
    sig = np.fft.irfft(spectrum, n=n_samples)
    return sig / (np.max(np.abs(sig)) + 1e-12)


def synth_dataset(out_dir, n_per_class: int = 4, seconds: float = 3.0, sample_rate: int = 44100,
                  seed: int = 0, eval_fraction: float = 0.25) -> Path:
    """Write WAV recordings, a tab-separated manifest and a starter run config.

    Each class is band-limited noise in its own frequency range plus a weak
    broadband floor. Returns the manifest path.
    """
    out_dir = Path(out_dir)
    (out_dir / "audio").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    nyq = sample_rate / 2
    bands = [(100.0, 600.0), (1500.0, 3500.0), (0.4 * nyq, 0.8 * nyq)]
    n_samples = int(round(seconds * sample_rate))
    n_eval = max(1, int(round(n_per_class * eval_fraction)))
    entries = []
    for c, label in enumerate(SYNTH_LABELS):
        for k in range(n_per_class):
            sig = 0.5 * _band_noise(rng, n_samples, sample_rate, *bands[c])
            sig += 0.05 * rng.standard_normal(n_samples)
            sig = np.clip(sig, -1.0, 1.0)
            rel = f"audio/{label}-{k:03d}.wav"
            write_wav(out_dir / rel, AudioClip(sig, sample_rate, f"{label}-{k:03d}"))
            entries.append(ManifestEntry(
                path=rel, scene_label=label,
                device_id=SYNTH_DEVICES[(c + k) % len(SYNTH_DEVICES)],
                city="synthville",
                split="eval" if k < n_eval else "train",
            ))
    manifest = out_dir / "manifest.tsv"
    write_manifest(manifest, entries)
    config = {
        "labels": list(SYNTH_LABELS),
        "expected_sample_rate": sample_rate,
        "paths": {
            "manifest": "manifest.tsv",
            "audio_root": ".",
            "features": "features",
            "runs": "runs",
        },
        "model": {"variant": "crdc"},
        "training": {"epochs": 5, "batch_size": 8},
    }
    (out_dir / "config.json").write_text(json.dumps(config, indent=2) + "\n")
    return manifest
