from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericalError, ShapeError


@dataclass
class AdamState:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState):
    """Bias-corrected Adam update applied in place to ``params``.

    Every gradient is checked before any parameter moves, so a non-finite
    gradient leaves the model untouched.
    """
    next_step = state.step + 1
    for name, g in grads.items():
        if name not in params:
            raise KeyError(f"gradient for unknown parameter {name!r}")
        if g.shape != params[name].shape:
            raise ShapeError(f"{name}: gradient shape {g.shape} != parameter shape {params[name].shape}")
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient in {name} at optimizer step {next_step}")

    state.step = next_step
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1 ** next_step
    corr2 = 1.0 - b2 ** next_step
    for name, g in grads.items():
        p = params[name]
        m = state.m.setdefault(name, np.zeros_like(p))
        v = state.v.setdefault(name, np.zeros_like(p))
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        p -= (state.learning_rate * (m / corr1) / (np.sqrt(v / corr2) + state.eps)).astype(p.dtype)
    return params, state
