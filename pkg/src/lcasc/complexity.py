"""Trainable-parameter audit at 32 bits per parameter."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Sequence

from .nn.spec import ModelSpec

BYTES_PER_PARAM = 4
KB = 1024


@dataclass
class LayerRow:
    name: str
    kind: str
    output_shape: tuple[int, ...]
    weights: int = 0
    biases: int = 0
    bn: int = 0

    @property
    def total(self) -> int:
        return self.weights + self.biases + self.bn


@dataclass
class ComplexityReport:
    variant: str
    rows: list[LayerRow] = field(default_factory=list)

    @property
    def total_params(self) -> int:
        """Every trainable parameter, BN gamma/beta included."""
        return sum(r.total for r in self.rows)

    @property
    def total_params_excl_bn(self) -> int:
        return sum(r.weights + r.biases for r in self.rows)

    @property
    def total_kb(self) -> float:
        return self.total_params * BYTES_PER_PARAM / KB

    @property
    def total_kb_excl_bn(self) -> float:
        return self.total_params_excl_bn * BYTES_PER_PARAM / KB

    def kb(self, include_bn: bool = True) -> float:
        return self.total_kb if include_bn else self.total_kb_excl_bn

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "bytes_per_param": BYTES_PER_PARAM,
            "rows": [{**asdict(r), "output_shape": list(r.output_shape), "total": r.total}
                     for r in self.rows],
            "total_params": self.total_params,
            "total_params_excl_bn": self.total_params_excl_bn,
            "total_kb": self.total_kb,
            "total_kb_excl_bn": self.total_kb_excl_bn,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        head = f"{'layer':<18} {'kind':<17} {'output':>14} {'weights':>9} {'bias':>6} {'bn':>5} {'KB':>9}"
        lines = [f"CNN-7 variant: {self.variant}", head, "-" * len(head)]
        for r in self.rows:
            shape = "x".join(str(s) for s in r.output_shape)
            kb = r.total * BYTES_PER_PARAM / KB
            lines.append(f"{r.name:<18} {r.kind:<17} {shape:>14} {r.weights:>9} {r.biases:>6} "
                         f"{r.bn:>5} {kb:>9.3f}")
        lines.append("-" * len(head))
        lines.append(f"total (BN included): {self.total_params} params = {self.total_kb:.2f} KB ({self.total_kb / 1024:.3f} MB)")
        lines.append(f"total (BN excluded): {self.total_params_excl_bn} params = {self.total_kb_excl_bn:.2f} KB ({self.total_kb_excl_bn / 1024:.3f} MB)")
        lines.append("sizes at 4 bytes per trainable parameter, 1 KB = 1024 bytes, 1 MB = 1024 KB; "
                     "BN running statistics are not trainable and not counted")
        return "\n".join(lines)


def count_params(spec: ModelSpec) -> ComplexityReport:
    shapes = spec.shapes()
    report = ComplexityReport(spec.variant)
    for layer, shape in zip(spec.layers, shapes):
        row = LayerRow(layer.name, layer.kind, shape)
        if layer.kind == "Conv2d":
            k = layer.kernel or 3
            row.weights = k * k * layer.in_channels * layer.out_channels
            row.biases = layer.out_channels
        elif layer.kind == "DecomposedConv2d":
            paths = layer.paths or layer.decomposition().paths
            row.weights = sum(p.weight_count for p in paths)
            row.biases = sum(p.out_channels for p in paths)
        elif layer.kind == "BatchNorm":
            row.bn = 2 * layer.in_channels
        elif layer.kind == "FullyConnected":
            row.weights = layer.in_channels * layer.out_channels
            row.biases = layer.out_channels
        report.rows.append(row)
    return report


def decomposition_ratios(spec: ModelSpec) -> dict[str, Fraction]:
    """Audited weights / standard 3x3 weights for every decomposed layer."""
    out = {}
    for layer in spec.layers:
        if layer.kind == "DecomposedConv2d":
            paths = layer.paths or layer.decomposition().paths
            weights = sum(p.weight_count for p in paths)
            out[layer.name] = Fraction(weights, 9 * layer.in_channels * layer.out_channels)
    return out


def ensemble_size(reports: Sequence[ComplexityReport], include_bn: bool = True) -> float:
    """Total KB of an ensemble of independently audited models."""
    if not reports:
        raise ValueError("ensemble_size needs at least one report")
    return sum(r.kb(include_bn) for r in reports)
