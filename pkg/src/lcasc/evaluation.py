"""Recording-level evaluation: patch averaging, optional product fusion, accuracy reports."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError
from .frontend import Spectrogram, split_patches
from .fusion import FusionInput, PredictionSet, average_patches, predict_label, prod_fusion
from .nn.network import Network


@dataclass
class EvalSample:
    recording_id: str
    label: int
    device: str
    spectrograms: Mapping[str, Spectrogram]


@dataclass
class EvalReport:
    class_names: list[str]
    confusion: np.ndarray
    device_counts: dict[str, tuple[int, int]] = field(default_factory=dict)
    branches: list[str] = field(default_factory=list)
    fused: bool = False

    @property
    def total(self) -> int:
        return int(self.confusion.sum())

    @property
    def overall_accuracy(self) -> float:
        return 100.0 * float(np.trace(self.confusion)) / max(self.total, 1)

    @property
    def per_class_accuracy(self) -> dict[str, float | None]:
        out = {}
        for i, name in enumerate(self.class_names):
            n = self.confusion[i].sum()
            out[name] = 100.0 * self.confusion[i, i] / n if n else None
        return out

    @property
    def per_device_accuracy(self) -> dict[str, float]:
        return {d: 100.0 * c / n for d, (c, n) in sorted(self.device_counts.items()) if n}

    def to_dict(self) -> dict:
        return {
            "branches": self.branches,
            "fused": self.fused,
            "class_names": self.class_names,
            "total": self.total,
            "correct": int(np.trace(self.confusion)),
            "overall_accuracy": self.overall_accuracy,
            "per_class_accuracy": self.per_class_accuracy,
            "per_device_accuracy": self.per_device_accuracy,
            "device_counts": {d: {"correct": c, "total": n}
                              for d, (c, n) in sorted(self.device_counts.items())},
            "confusion": self.confusion.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        title = "+".join(self.branches) + (" (PROD fusion)" if self.fused else "")
        width = max([len(n) for n in self.class_names] + [8])
        lines = [f"evaluation: {title}", f"{'category':<{width}}  {'n':>5}  {'acc %':>6}"]
        for i, name in enumerate(self.class_names):
            acc = self.per_class_accuracy[name]
            n = int(self.confusion[i].sum())
            lines.append(f"{name:<{width}}  {n:>5}  {'-' if acc is None else f'{acc:.1f}':>6}")
        lines.append(f"{'average':<{width}}  {self.total:>5}  {self.overall_accuracy:>6.1f}")
        lines.append("")
        lines.append(f"{'device':<8}  {'n':>5}  {'acc %':>6}")
        for d, (c, n) in sorted(self.device_counts.items()):
            lines.append(f"{d or '-':<8}  {n:>5}  {100.0 * c / n:>6.1f}")
        lines.append("")
        lines.append("confusion (rows: true, columns: predicted)")
        for i, name in enumerate(self.class_names):
            lines.append(f"{name:<{width}}  " + " ".join(f"{v:>4d}" for v in self.confusion[i]))
        return "\n".join(lines) + "\n"


def recording_probabilities(net: Network, spec: Spectrogram, patch_frames: int, overlap: float,
                            rec_id: str = "") -> np.ndarray:
    """Patch-averaged class probabilities of one network for one recording."""
    patches = split_patches(spec, patch_frames, overlap, rec_id)
    probs = net.predict(np.stack([p.values for p in patches]))
    return average_patches(PredictionSet(probs, rec_id))


def evaluate(models: Mapping[str, Network], samples: Iterable[EvalSample], class_names: Sequence[str],
             fuse: bool = False, patch_frames: int = 128, overlap: float = 0.5) -> EvalReport:
    """Score recordings with one network, or fuse several branches by class-wise product."""
    if not models:
        raise ConfigError("evaluate needs at least one model")
    if len(models) > 1 and not fuse:
        raise ConfigError("several branches given without fusion; evaluate them one at a time")
    branches = sorted(models)
    c = len(class_names)
    confusion = np.zeros((c, c), dtype=int)
    devices: dict[str, list[int]] = {}
    for s in samples:
        missing = [b for b in branches if b not in s.spectrograms]
        if missing:
            raise ConfigError(f"{s.recording_id}: no features for branch(es) {missing}")
        averaged = [recording_probabilities(models[b], s.spectrograms[b], patch_frames, overlap,
                                            s.recording_id) for b in branches]
        scores = prod_fusion(FusionInput(np.stack(averaged))) if fuse else averaged[0]
        pred = predict_label(scores)
        confusion[s.label, pred] += 1
        tally = devices.setdefault(s.device, [0, 0])
        tally[0] += int(pred == s.label)
        tally[1] += 1
    return EvalReport(list(class_names), confusion,
                      {d: (v[0], v[1]) for d, v in devices.items()}, branches, fuse)
