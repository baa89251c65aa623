"""Stateless forward/backward kernels on channels-last (N, H, W, C) arrays.

Single-sample (H, W, C) inputs are accepted by the forward kernels and
returned without the batch axis.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError

BN_EPS = 1e-5
BN_MOMENTUM = 0.99


def _batched(x):
    x = np.asarray(x)
    if x.ndim == 3:
        return x[None], True
    if x.ndim == 4:
        return x, False
    raise ShapeError(f"expected an HxWxC or NxHxWxC array, got shape {x.shape}")


def conv2d_forward(x, weights, bias):
    """Stride-1 'same' cross-correlation. ``weights`` is [k, k, C_in, C_out], k odd."""
    xb, single = _batched(x)
    k = weights.shape[0]
    if (weights.ndim != 4 or weights.shape[1] != k or k % 2 == 0
            or weights.shape[2] != xb.shape[3] or bias.shape != (weights.shape[3],)):
        raise ShapeError(
            f"conv2d: input {xb.shape} incompatible with weights {weights.shape} / bias {bias.shape}"
        )
    n, h, w, _ = xb.shape
    if k == 1:
        y = xb @ weights[0, 0]
    else:
        p = k // 2
        xp = np.pad(xb, ((0, 0), (p, p), (p, p), (0, 0)))
        y = np.zeros((n, h, w, weights.shape[3]), dtype=np.result_type(xb, weights))
        for i in range(k):
            for j in range(k):
                y += xp[:, i:i + h, j:j + w, :] @ weights[i, j]
    y += bias
    return y[0] if single else y


def conv2d_backward(x, weights, dy):
    """Gradients (dx, dweights, dbias) of :func:`conv2d_forward` for batched input."""
    k = weights.shape[0]
    n, h, w, c_in = x.shape
    c_out = weights.shape[3]
    dy2 = dy.reshape(-1, c_out)
    db = dy2.sum(axis=0)
    if k == 1:
        dw = (x.reshape(-1, c_in).T @ dy2)[None, None]
        dx = dy @ weights[0, 0].T
        return dx, dw, db
    p = k // 2
    xp = np.pad(x, ((0, 0), (p, p), (p, p), (0, 0)))
    dxp = np.zeros_like(xp)
    dw = np.empty_like(weights)
    for i in range(k):
        for j in range(k):
            window = xp[:, i:i + h, j:j + w, :].reshape(-1, c_in)
            dw[i, j] = window.T @ dy2
            dxp[:, i:i + h, j:j + w, :] += dy @ weights[i, j].T
    return dxp[:, p:p + h, p:p + w, :], dw, db


def batchnorm_forward(x, gamma, beta, running_mean, running_var, mode="train",
                      momentum=BN_MOMENTUM, eps=BN_EPS):
    """Per-channel (last axis) batch normalization.

    In train mode the running statistics are updated in place and the
    returned cache feeds :func:`batchnorm_backward`.
    """
    if gamma.shape != (x.shape[-1],) or beta.shape != gamma.shape:
        raise ShapeError(f"batchnorm: {x.shape[-1]} channels vs gamma {gamma.shape}")
    axes = tuple(range(x.ndim - 1))
    if mode == "train":
        mean = x.mean(axis=axes)
        var = x.var(axis=axes)
        running_mean *= momentum
        running_mean += (1 - momentum) * mean
        running_var *= momentum
        running_var += (1 - momentum) * var
    elif mode == "infer":
        mean, var = running_mean, running_var
    else:
        raise ValueError(f"mode must be 'train' or 'infer', got {mode!r}")
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean) * inv_std
    return gamma * xhat + beta, (xhat, inv_std, gamma, mode)


def batchnorm_backward(dy, cache):
    xhat, inv_std, gamma, mode = cache
    axes = tuple(range(dy.ndim - 1))
    dgamma = (dy * xhat).sum(axis=axes)
    dbeta = dy.sum(axis=axes)
    dxhat = dy * gamma
    if mode == "infer":
        return dxhat * inv_std, dgamma, dbeta
    m = dy.size // dy.shape[-1]
    dx = (inv_std / m) * (m * dxhat - dxhat.sum(axis=axes) - xhat * (dxhat * xhat).sum(axis=axes))
    return dx, dgamma, dbeta


def relu(x):
    return np.maximum(x, 0)


def relu_backward(x, dy):
    return dy * (x > 0)


def avg_pool(x, k=2):
    xb, single = _batched(x)
    n, h, w, c = xb.shape
    ho, wo = h // k, w // k
    if ho < 1 or wo < 1:
        raise ShapeError(f"avg_pool: {h}x{w} input is smaller than the {k}x{k} window")
    y = xb[:, :ho * k, :wo * k, :].reshape(n, ho, k, wo, k, c).mean(axis=(2, 4))
    return y[0] if single else y


def avg_pool_backward(x_shape, dy, k=2):
    n, h, w, c = x_shape
    ho, wo = dy.shape[1], dy.shape[2]
    dx = np.zeros(x_shape, dtype=dy.dtype)
    spread = np.repeat(np.repeat(dy, k, axis=1), k, axis=2) / (k * k)
    dx[:, :ho * k, :wo * k, :] = spread
    return dx


def global_avg_pool(x):
    xb, single = _batched(x)
    y = xb.mean(axis=(1, 2))
    return y[0] if single else y


def global_avg_pool_backward(x_shape, dy):
    n, h, w, c = x_shape
    return np.broadcast_to(dy[:, None, None, :] / (h * w), x_shape).copy()


def dropout(x, p, mode, rng):
    """Inverted dropout. Returns (output, mask); mask is None when it is the identity."""
    if mode != "train" or p == 0:
        return x, None
    mask = (rng.random(x.shape) >= p).astype(x.dtype) / (1.0 - p)
    return x * mask, mask


def fully_connected(x, weights, bias):
    if x.shape[-1] != weights.shape[0] or bias.shape != (weights.shape[1],):
        raise ShapeError(
            f"fully_connected: input {x.shape} incompatible with weights {weights.shape} / bias {bias.shape}"
        )
    return x @ weights + bias


def softmax(x):
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_backward(y, dy):
    return y * (dy - (dy * y).sum(axis=-1, keepdims=True))
