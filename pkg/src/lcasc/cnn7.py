"""CNN-7 builders: baseline, channel-restricted (CR) and CR + decomposed convolution (CRDC).

Each of the six blocks is BN -> Conv -> ReLU -> BN -> [AvgPool] -> Dropout(0.1),
with pooling after blocks 2, 4 and 5 and global average pooling after
block 6, followed by FC -> Softmax.
"""

from __future__ import annotations

from fractions import Fraction

from .errors import ConfigError
from .nn.spec import DecomposedConvSpec, LayerSpec, ModelSpec

VARIANTS = ("baseline", "cr", "crdc")

BASELINE_CHANNELS = (32, 32, 64, 64, 128, 128)
CR_CHANNELS = (16, 32, 32, 32, 64, 64)
POOL_AFTER = {2: "avg", 4: "avg", 5: "avg", 6: "gap"}
DROPOUT = 0.1


def normalize_variant(variant: str) -> str:
    v = str(variant).lower().replace("+", "").replace("_", "").replace("-", "")
    if v not in VARIANTS:
        raise ConfigError(f"unknown CNN-7 variant {variant!r}; expected one of {VARIANTS}")
    return v


def build_cnn7(variant: str = "baseline", class_count: int = 10,
               input_shape: tuple[int, int, int] = (128, 128, 3)) -> ModelSpec:
    variant = normalize_variant(variant)
    if class_count < 2:
        raise ConfigError(f"class_count must be >= 2, got {class_count}")
    ladder = BASELINE_CHANNELS if variant == "baseline" else CR_CHANNELS
    layers: list[LayerSpec] = []
    c_in = input_shape[2]
    for block, c_out in enumerate(ladder, start=1):
        tag = f"block{block}"
        layers.append(LayerSpec("BatchNorm", f"{tag}.bn_in", in_channels=c_in))
        if variant == "crdc" and c_in % 4 == 0 and c_out % 4 == 0:
            dc = DecomposedConvSpec(c_in, c_out)
            layers.append(LayerSpec("DecomposedConv2d", f"{tag}.conv", in_channels=c_in,
                                    out_channels=c_out, kernel=3, paths=dc.paths))
        else:
            layers.append(LayerSpec("Conv2d", f"{tag}.conv", in_channels=c_in,
                                    out_channels=c_out, kernel=3))
        layers.append(LayerSpec("ReLU", f"{tag}.relu"))
        layers.append(LayerSpec("BatchNorm", f"{tag}.bn_out", in_channels=c_out))
        pool = POOL_AFTER.get(block)
        if pool == "avg":
            layers.append(LayerSpec("AvgPool", f"{tag}.pool", pool=2))
        elif pool == "gap":
            layers.append(LayerSpec("GlobalAvgPool", f"{tag}.gap"))
        layers.append(LayerSpec("Dropout", f"{tag}.dropout", p=DROPOUT))
        c_in = c_out
    layers.append(LayerSpec("FullyConnected", "fc", in_channels=c_in, out_channels=class_count))
    layers.append(LayerSpec("Softmax", "softmax"))
    spec = ModelSpec(tuple(layers), variant, class_count, tuple(input_shape))
    spec.shapes()
    return spec


def block_output_shapes(spec: ModelSpec) -> list[tuple[int, ...]]:
    """Output shape after each block's dropout, then the FC output: one entry per row of the layer table."""
    shapes = spec.shapes()
    rows = [s for layer, s in zip(spec.layers, shapes) if layer.kind == "Dropout"]
    rows.append(shapes[-1])
    return rows


def weight_ratio(spec: DecomposedConvSpec) -> Fraction:
    """Decomposed / standard 3x3 weight count; 17/144 for every valid channel pair."""
    return spec.weight_ratio()
