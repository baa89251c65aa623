"""Declarative network description shared by the executor and the auditor."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Optional

from ..errors import ConfigError, ShapeError

LAYER_KINDS = (
    "Conv2d",
    "BatchNorm",
    "ReLU",
    "AvgPool",
    "GlobalAvgPool",
    "Dropout",
    "FullyConnected",
    "Softmax",
    "DecomposedConv2d",
    "Concat",
)


@dataclass(frozen=True)
class PathSpec:
    """One branch of a decomposed convolution: a kxk conv over input channels [in_start, in_stop)."""

    kernel: int
    in_start: int
    in_stop: int
    out_channels: int

    @property
    def in_channels(self) -> int:
        return self.in_stop - self.in_start

    @property
    def weight_count(self) -> int:
        return self.kernel * self.kernel * self.in_channels * self.out_channels


@dataclass(frozen=True)
class DecomposedConvSpec:
    """A 3x3 conv replaced by four parallel sub-convolutions whose outputs are concatenated.

    P1: 3x3 over the first quarter of the inputs, P2/P3: 1x1 over each half,
    P4: 1x1 over all inputs. Every path emits ``c_out // 4`` channels.
    """

    c_in: int
    c_out: int

    def __post_init__(self):
        if self.c_in % 4 or self.c_out % 4 or self.c_in <= 0 or self.c_out <= 0:
            raise ConfigError(
                f"decomposed conv needs channel counts divisible by 4, got {self.c_in}->{self.c_out}"
            )

    @property
    def paths(self) -> tuple[PathSpec, ...]:
        q, h, o = self.c_in // 4, self.c_in // 2, self.c_out // 4
        return (
            PathSpec(3, 0, q, o),
            PathSpec(1, 0, h, o),
            PathSpec(1, h, self.c_in, o),
            PathSpec(1, 0, self.c_in, o),
        )

    @property
    def weight_count(self) -> int:
        return sum(p.weight_count for p in self.paths)

    @property
    def standard_weight_count(self) -> int:
        return 9 * self.c_in * self.c_out

    def weight_ratio(self) -> Fraction:
        return Fraction(self.weight_count, self.standard_weight_count)


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    name: str = ""
    in_channels: Optional[int] = None
    out_channels: Optional[int] = None
    kernel: Optional[int] = None
    pool: Optional[int] = None
    p: Optional[float] = None
    paths: tuple[PathSpec, ...] = ()

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ConfigError(f"unknown layer kind {self.kind!r}")
        if self.kind == "Dropout" and not (self.p is not None and 0.0 <= self.p < 1.0):
            raise ConfigError(f"dropout probability must be in [0, 1), got {self.p}")
        if self.kind == "Concat":
            raise ConfigError("Concat only appears as the merge step inside DecomposedConv2d")

    def decomposition(self) -> DecomposedConvSpec:
        return DecomposedConvSpec(self.in_channels, self.out_channels)

    def output_shape(self, shape: tuple[int, ...]) -> tuple[int, ...]:
        """Shape of a single sample after this layer (no batch axis)."""
        k = self.kind
        if k in ("Conv2d", "DecomposedConv2d"):
            if len(shape) != 3 or shape[2] != self.in_channels:
                raise ShapeError(f"{self.name}: expects HxWx{self.in_channels}, got {shape}")
            return (shape[0], shape[1], self.out_channels)
        if k == "BatchNorm":
            if shape[-1] != self.in_channels:
                raise ShapeError(f"{self.name}: expects {self.in_channels} channels, got {shape}")
            return shape
        if k == "AvgPool":
            if len(shape) != 3:
                raise ShapeError(f"{self.name}: expects HxWxC, got {shape}")
            return (shape[0] // self.pool, shape[1] // self.pool, shape[2])
        if k == "GlobalAvgPool":
            if len(shape) != 3:
                raise ShapeError(f"{self.name}: expects HxWxC, got {shape}")
            return (shape[2],)
        if k == "FullyConnected":
            if shape != (self.in_channels,):
                raise ShapeError(f"{self.name}: expects ({self.in_channels},), got {shape}")
            return (self.out_channels,)
        return shape


@dataclass(frozen=True)
class ModelSpec:
    layers: tuple[LayerSpec, ...]
    variant: str
    class_count: int = 10
    input_shape: tuple[int, int, int] = (128, 128, 3)

    def shapes(self, input_shape: tuple[int, ...] | None = None) -> list[tuple[int, ...]]:
        """Per-layer output shapes; raises ShapeError when the stack does not compose."""
        shape = tuple(input_shape or self.input_shape)
        out = []
        for layer in self.layers:
            shape = layer.output_shape(shape)
            if any(s < 1 for s in shape):
                raise ShapeError(f"{layer.name}: collapses to empty shape {shape}")
            out.append(shape)
        return out

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        layers = tuple(
            LayerSpec(**{**ld, "paths": tuple(PathSpec(**p) for p in ld.get("paths", ()))})
            for ld in d["layers"]
        )
        return cls(layers, d["variant"], d["class_count"], tuple(d["input_shape"]))

    @classmethod
    def from_json(cls, text: str) -> "ModelSpec":
        return cls.from_dict(json.loads(text))
