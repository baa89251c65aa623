"""Layer objects: parameters, cached activations and hand-written backward passes."""

from __future__ import annotations

import numpy as np

from ..errors import StateError
from . import functional as F
from .spec import LayerSpec, PathSpec


def truncated_normal(rng: np.random.Generator, shape, std: float, dtype) -> np.ndarray:
    """Normal(0, std) resampled until every draw lies within two standard deviations."""
    out = rng.standard_normal(shape)
    bad = np.abs(out) > 2.0
    while bad.any():
        out[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(out) > 2.0
    return (out * std).astype(dtype)


class Layer:
    """Base layer. Subclasses fill ``params`` (trainable) and ``buffers`` (not trained)."""

    def __init__(self, name: str):
        self.name = name
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.buffers: dict[str, np.ndarray] = {}
        self._cache = None

    def forward(self, x, train: bool = False):
        raise NotImplementedError

    def backward(self, dy):
        raise NotImplementedError

    def _take_cache(self):
        if self._cache is None:
            raise StateError(f"{self.name}: backward called without a cached forward pass")
        cache, self._cache = self._cache, None
        return cache


class Conv2d(Layer):
    def __init__(self, name, in_channels, out_channels, kernel=3, *, rng, dtype=np.float32):
        super().__init__(name)
        std = np.sqrt(2.0 / (kernel * kernel * in_channels))
        self.params["weight"] = truncated_normal(rng, (kernel, kernel, in_channels, out_channels), std, dtype)
        self.params["bias"] = np.zeros(out_channels, dtype=dtype)

    def forward(self, x, train=False):
        self._cache = x
        return F.conv2d_forward(x, self.params["weight"], self.params["bias"])

    def backward(self, dy):
        x = self._take_cache()
        dx, dw, db = F.conv2d_backward(x, self.params["weight"], dy)
        self.grads["weight"], self.grads["bias"] = dw, db
        return dx


class DecomposedConv2d(Layer):
    """Four parallel sub-convolutions over channel slices, concatenated on the channel axis."""

    def __init__(self, name, paths: tuple[PathSpec, ...], *, rng, dtype=np.float32):
        super().__init__(name)
        self.paths = paths
        for i, path in enumerate(paths, start=1):
            std = np.sqrt(2.0 / (path.kernel * path.kernel * path.in_channels))
            self.params[f"p{i}.weight"] = truncated_normal(
                rng, (path.kernel, path.kernel, path.in_channels, path.out_channels), std, dtype)
            self.params[f"p{i}.bias"] = np.zeros(path.out_channels, dtype=dtype)

    def forward(self, x, train=False):
        self._cache = x
        outs = [
            F.conv2d_forward(x[..., path.in_start:path.in_stop],
                             self.params[f"p{i}.weight"], self.params[f"p{i}.bias"])
            for i, path in enumerate(self.paths, start=1)
        ]
        return np.concatenate(outs, axis=-1)

    def backward(self, dy):
        x = self._take_cache()
        dx = np.zeros_like(x)
        offset = 0
        for i, path in enumerate(self.paths, start=1):
            dy_path = dy[..., offset:offset + path.out_channels]
            offset += path.out_channels
            dxi, dw, db = F.conv2d_backward(
                np.ascontiguousarray(x[..., path.in_start:path.in_stop]),
                self.params[f"p{i}.weight"], np.ascontiguousarray(dy_path))
            dx[..., path.in_start:path.in_stop] += dxi
            self.grads[f"p{i}.weight"], self.grads[f"p{i}.bias"] = dw, db
        return dx


class BatchNorm(Layer):
    def __init__(self, name, channels, *, dtype=np.float32):
        super().__init__(name)
        self.params["gamma"] = np.ones(channels, dtype=dtype)
        self.params["beta"] = np.zeros(channels, dtype=dtype)
        self.buffers["running_mean"] = np.zeros(channels, dtype=dtype)
        self.buffers["running_var"] = np.ones(channels, dtype=dtype)

    def forward(self, x, train=False):
        y, self._cache = F.batchnorm_forward(
            x, self.params["gamma"], self.params["beta"],
            self.buffers["running_mean"], self.buffers["running_var"],
            mode="train" if train else "infer")
        return y.astype(x.dtype, copy=False)

    def backward(self, dy):
        dx, self.grads["gamma"], self.grads["beta"] = F.batchnorm_backward(dy, self._take_cache())
        return dx


class ReLU(Layer):
    def forward(self, x, train=False):
        self._cache = x
        return F.relu(x)

    def backward(self, dy):
        return F.relu_backward(self._take_cache(), dy)


class AvgPool(Layer):
    def __init__(self, name, k=2):
        super().__init__(name)
        self.k = k

    def forward(self, x, train=False):
        self._cache = x.shape
        return F.avg_pool(x, self.k)

    def backward(self, dy):
        return F.avg_pool_backward(self._take_cache(), dy, self.k)


class GlobalAvgPool(Layer):
    def forward(self, x, train=False):
        self._cache = x.shape
        return F.global_avg_pool(x)

    def backward(self, dy):
        return F.global_avg_pool_backward(self._take_cache(), dy)


class Dropout(Layer):
    def __init__(self, name, p, *, rng):
        super().__init__(name)
        self.p = p
        self.rng = rng

    def forward(self, x, train=False):
        y, mask = F.dropout(x, self.p, "train" if train else "infer", self.rng)
        self._cache = (mask,)
        return y

    def backward(self, dy):
        (mask,) = self._take_cache()
        return dy if mask is None else dy * mask


class FullyConnected(Layer):
    def __init__(self, name, in_features, out_features, *, rng, dtype=np.float32):
        super().__init__(name)
        std = np.sqrt(2.0 / in_features)
        self.params["weight"] = truncated_normal(rng, (in_features, out_features), std, dtype)
        self.params["bias"] = np.zeros(out_features, dtype=dtype)

    def forward(self, x, train=False):
        self._cache = x
        return F.fully_connected(x, self.params["weight"], self.params["bias"])

    def backward(self, dy):
        x = self._take_cache()
        self.grads["weight"] = x.T @ dy
        self.grads["bias"] = dy.sum(axis=0)
        return dy @ self.params["weight"].T


class Softmax(Layer):
    def forward(self, x, train=False):
        y = F.softmax(x)
        self._cache = y
        return y

    def backward(self, dy):
        return F.softmax_backward(self._take_cache(), dy)


def build_layer(spec: LayerSpec, *, rng, dtype=np.float32) -> Layer:
    k = spec.kind
    if k == "Conv2d":
        return Conv2d(spec.name, spec.in_channels, spec.out_channels, spec.kernel or 3, rng=rng, dtype=dtype)
    if k == "DecomposedConv2d":
        return DecomposedConv2d(spec.name, spec.paths or spec.decomposition().paths, rng=rng, dtype=dtype)
    if k == "BatchNorm":
        return BatchNorm(spec.name, spec.in_channels, dtype=dtype)
    if k == "ReLU":
        return ReLU(spec.name)
    if k == "AvgPool":
        return AvgPool(spec.name, spec.pool or 2)
    if k == "GlobalAvgPool":
        return GlobalAvgPool(spec.name)
    if k == "Dropout":
        return Dropout(spec.name, spec.p, rng=rng)
    if k == "FullyConnected":
        return FullyConnected(spec.name, spec.in_channels, spec.out_channels, rng=rng, dtype=dtype)
    if k == "Softmax":
        return Softmax(spec.name)
    raise ValueError(f"no executable layer for kind {k!r}")
