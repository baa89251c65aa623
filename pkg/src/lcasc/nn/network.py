"""Sequential executor for a ModelSpec, plus checkpoint serialization."""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import DecodeError, ShapeError
from .layers import Layer, build_layer
from .spec import ModelSpec

CHECKPOINT_MAGIC = b"LCCKPT01"


class Network:
    def __init__(self, spec: ModelSpec, *, seed: int = 0, dtype=np.float32):
        spec.shapes()  # fail early on a stack that does not compose
        self.spec = spec
        self.dtype = np.dtype(dtype)
        init_rng, self.dropout_rng = (np.random.default_rng(s)
                                      for s in np.random.SeedSequence(seed).spawn(2))
        self.layers: list[Layer] = [
            build_layer(ls, rng=self.dropout_rng if ls.kind == "Dropout" else init_rng, dtype=self.dtype)
            for ls in spec.layers
        ]

    def forward(self, x, train: bool = False, trace: list | None = None):
        """Batched forward pass returning class probabilities.

        If ``trace`` is a list, (layer name, output shape without batch axis)
        pairs are appended to it.
        """
        x = np.asarray(x, dtype=self.dtype)
        if x.ndim != 4 or x.shape[-1] != self.spec.input_shape[-1]:
            raise ShapeError(
                f"network expects N x H x W x {self.spec.input_shape[-1]} input, got {x.shape}")
        for layer in self.layers:
            x = layer.forward(x, train)
            if trace is not None:
                trace.append((layer.name, x.shape[1:]))
        return x

    __call__ = forward

    def backward(self, dout):
        for layer in reversed(self.layers):
            dout = layer.backward(dout)
        return dout

    def parameters(self) -> dict[str, np.ndarray]:
        return {f"{l.name}.{k}": v for l in self.layers for k, v in l.params.items()}

    def gradients(self) -> dict[str, np.ndarray]:
        return {f"{l.name}.{k}": v for l in self.layers for k, v in l.grads.items()}

    def buffers(self) -> dict[str, np.ndarray]:
        return {f"{l.name}.{k}": v for l in self.layers for k, v in l.buffers.items()}

    def parameter_count(self) -> int:
        return sum(int(v.size) for v in self.parameters().values())

    def predict(self, x, batch_size: int = 64) -> np.ndarray:
        x = np.asarray(x)
        return np.concatenate([self.forward(x[i:i + batch_size]) for i in range(0, len(x), batch_size)])


def save_checkpoint(path, net: Network, meta: dict | None = None) -> None:
    """Write a JSON header plus little-endian float32 tensors.

    Header: model spec, free-form ``meta`` (branch, config hash, ...) and a
    tensor index with name, shape, trainable flag and byte offset.
    """
    tensors = [(n, a, True) for n, a in net.parameters().items()]
    tensors += [(n, a, False) for n, a in net.buffers().items()]
    index, blobs, offset = [], [], 0
    for name, arr, trainable in tensors:
        blob = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        index.append({"name": name, "shape": list(arr.shape), "trainable": trainable, "offset": offset})
        blobs.append(blob)
        offset += len(blob)
    header = json.dumps({"model_spec": net.spec.to_dict(), "meta": meta or {}, "tensors": index},
                        sort_keys=True).encode()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(CHECKPOINT_MAGIC + struct.pack("<I", len(header)) + header + b"".join(blobs))
    tmp.replace(path)


def read_checkpoint_header(path) -> dict:
    raw = Path(path).read_bytes()
    return _parse_header(raw, path)[0]


def _parse_header(raw: bytes, path):
    if raw[:8] != CHECKPOINT_MAGIC:
        raise DecodeError(f"{path}: not a checkpoint (bad magic at offset 0)")
    (hlen,) = struct.unpack_from("<I", raw, 8)
    return json.loads(raw[12:12 + hlen]), 12 + hlen


def load_checkpoint(path, *, dtype=np.float32) -> tuple[Network, dict]:
    raw = Path(path).read_bytes()
    header, base = _parse_header(raw, path)
    net = Network(ModelSpec.from_dict(header["model_spec"]), dtype=dtype)
    targets = {**net.parameters(), **net.buffers()}
    for entry in header["tensors"]:
        target = targets.get(entry["name"])
        if target is None or list(target.shape) != entry["shape"]:
            raise DecodeError(f"{path}: tensor {entry['name']} does not match the model spec")
        data = np.frombuffer(raw, dtype="<f4", count=target.size, offset=base + entry["offset"])
        target[...] = data.reshape(target.shape)
    return net, header
