"""Cross-entropy (batch mean) and KL-divergence-with-L2 (batch sum) objectives.

Each loss returns ``(value, grad_wrt_probabilities)``. Predictions are
clamped to [PROB_FLOOR, 1] before the log; the gradient is zero where the
clamp is active.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError

PROB_FLOOR = 1e-7


def _check(y_pred, y_true):
    y_pred = np.asarray(y_pred, dtype=np.float64)
    y_true = np.asarray(y_true, dtype=np.float64)
    if y_pred.shape != y_true.shape or y_pred.ndim != 2:
        raise ShapeError(f"loss: predictions {y_pred.shape} vs targets {y_true.shape}")
    return y_pred, y_true


def _clamp(y_pred):
    clamped = np.clip(y_pred, PROB_FLOOR, 1.0)
    active = (y_pred >= PROB_FLOOR) & (y_pred <= 1.0)
    return clamped, active


def cross_entropy_loss(y_pred, y_true):
    """Mean over the batch of -sum_c y log(y_hat)."""
    y_pred, y_true = _check(y_pred, y_true)
    n = len(y_pred)
    q, active = _clamp(y_pred)
    loss = -np.sum(y_true * np.log(q)) / n
    grad = np.where(active, -y_true / (q * n), 0.0)
    return float(loss), grad


def l2_penalty(params, lam: float) -> float:
    return 0.5 * lam * sum(float(np.sum(np.square(p, dtype=np.float64))) for p in params)


def kl_divergence(y_pred, y_true):
    """Sum over the batch of KL(y || y_hat), with 0 log 0 = 0."""
    y_pred, y_true = _check(y_pred, y_true)
    q, active = _clamp(y_pred)
    pos = y_true > 0
    terms = np.zeros_like(y_true)
    terms[pos] = y_true[pos] * (np.log(y_true[pos]) - np.log(q[pos]))
    grad = np.where(active, -y_true / q, 0.0)
    return float(terms.sum()), grad


def kl_mixup_loss(y_pred, y_true, params=(), lam: float = 0.0):
    """KL divergence summed over samples plus (lam / 2) * ||params||^2.

    The returned gradient covers the predictions only; the penalty gradient
    is ``lam * theta`` per parameter and is added by the trainer.
    """
    kl, grad = kl_divergence(y_pred, y_true)
    return kl + l2_penalty(params, lam), grad
