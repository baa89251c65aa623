"""Minimal channels-last CNN engine with hand-written gradients."""

from .network import Network, load_checkpoint, save_checkpoint
from .optim import AdamState, adam_step
from .spec import DecomposedConvSpec, LayerSpec, ModelSpec, PathSpec

__all__ = [
    "AdamState",
    "DecomposedConvSpec",
    "LayerSpec",
    "ModelSpec",
    "Network",
    "PathSpec",
    "adam_step",
    "load_checkpoint",
    "save_checkpoint",
]
