"""Patch averaging, argmax labelling and product late fusion."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

SIMPLEX_TOL = 1e-6


def _check_simplex_rows(p, what):
    if np.any(p < -SIMPLEX_TOL) or np.any(np.abs(p.sum(axis=-1) - 1.0) > SIMPLEX_TOL):
        raise ValidationError(f"{what}: rows must be probability vectors")


@dataclass
class PredictionSet:
    """Per-patch class probabilities [N patches, C classes] for one recording."""

    probs: np.ndarray
    recording_id: str = ""

    def __post_init__(self):
        self.probs = np.atleast_2d(np.asarray(self.probs, dtype=np.float64))
        _check_simplex_rows(self.probs, f"prediction set {self.recording_id!r}")


@dataclass
class FusionInput:
    """Patch-averaged probabilities of S networks [S, C] for one recording."""

    probs: np.ndarray

    def __post_init__(self):
        self.probs = np.atleast_2d(np.asarray(self.probs, dtype=np.float64))


def average_patches(ps: PredictionSet) -> np.ndarray:
    if ps.probs.shape[0] == 0:
        raise ValidationError("cannot average an empty prediction set")
    return ps.probs.mean(axis=0)


def predict_label(p) -> int:
    """Index of the maximum score; ties go to the lowest index."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValidationError("predict_label expects a nonempty vector")
    if not np.all(np.isfinite(p)):
        raise ValidationError("predict_label got non-finite scores")
    return int(np.argmax(p))


def prod_fusion(f: FusionInput) -> np.ndarray:
    """Class-wise product over the S networks, divided by S. Not renormalized."""
    p = f.probs
    if p.shape[0] < 1:
        raise ValidationError("fusion needs at least one network")
    if np.any(p < 0):
        raise ValidationError("fusion inputs must be nonnegative")
    return np.prod(p, axis=0) / p.shape[0]
