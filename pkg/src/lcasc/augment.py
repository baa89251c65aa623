"""Mixup and spectrum masking for patch batches."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError, ValidationError


@dataclass(frozen=True)
class MixupConfig:
    enabled: bool = True
    alpha: float = 0.4

    def __post_init__(self):
        if self.alpha <= 0:
            raise ConfigError(f"mixup alpha must be positive, got {self.alpha}")

    def draw(self, rng: np.random.Generator) -> float:
        return float(rng.beta(self.alpha, self.alpha))


@dataclass(frozen=True)
class SpecAugmentConfig:
    enabled: bool = True
    n_time_masks: int = 2
    max_time_width: int = 20
    n_freq_masks: int = 2
    max_freq_width: int = 20
    fill_value: float = 0.0

    def __post_init__(self):
        if min(self.n_time_masks, self.n_freq_masks, self.max_time_width, self.max_freq_width) < 0:
            raise ConfigError("mask counts and widths must be nonnegative")

    def check_patch(self, shape) -> None:
        n_bins, n_frames = shape[0], shape[1]
        if self.max_freq_width >= n_bins or self.max_time_width >= n_frames:
            raise ConfigError(
                f"mask widths ({self.max_freq_width} bins, {self.max_time_width} frames) "
                f"must be smaller than the patch ({n_bins}x{n_frames})")


def mixup_batch(x1, x2, y1, y2, lam: float):
    """Convex combination of two input batches and their label distributions."""
    x1, x2, y1, y2 = (np.asarray(a) for a in (x1, x2, y1, y2))
    if x1.shape != x2.shape or y1.shape != y2.shape or len(x1) != len(y1):
        raise ShapeError(f"mixup: shapes {x1.shape}/{x2.shape} and {y1.shape}/{y2.shape} do not align")
    if not 0.0 <= lam <= 1.0:
        raise ValidationError(f"mixup coefficient must be in [0, 1], got {lam}")
    x = lam * x1 + (1.0 - lam) * x2
    y = lam * y1 + (1.0 - lam) * y2
    return x.astype(x1.dtype, copy=False), y


def mixup_shuffled(x, y, cfg: MixupConfig, rng: np.random.Generator):
    """Mix a batch with a random permutation of itself; one coefficient per batch."""
    lam = cfg.draw(rng)
    perm = rng.permutation(len(x))
    return mixup_batch(x, x[perm], y, y[perm], lam)


def draw_masks(shape, cfg: SpecAugmentConfig, rng: np.random.Generator):
    """Sample (axis, start, width) bands for one patch; axis 0 is frequency, 1 is time."""
    n_bins, n_frames = shape[0], shape[1]
    bands = []
    for axis, count, max_w, extent in ((1, cfg.n_time_masks, cfg.max_time_width, n_frames),
                                       (0, cfg.n_freq_masks, cfg.max_freq_width, n_bins)):
        for _ in range(count):
            width = int(rng.integers(0, max_w + 1))
            start = int(rng.integers(0, extent - width + 1))
            bands.append((axis, start, width))
    return bands


def apply_masks(x, bands, fill_value: float = 0.0):
    out = np.array(x, copy=True)
    for axis, start, width in bands:
        if axis == 0:
            out[start:start + width, :, :] = fill_value
        else:
            out[:, start:start + width, :] = fill_value
    return out


def spec_augment(x, cfg: SpecAugmentConfig, rng: np.random.Generator):
    """Mask random time and frequency bands of one [n_bins, n_frames, C] patch."""
    cfg.check_patch(x.shape)
    return apply_masks(x, draw_masks(x.shape, cfg, rng), cfg.fill_value)
