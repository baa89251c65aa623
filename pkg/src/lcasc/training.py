"""Per-patch training loop with optional mixup and spectrum masking."""

from __future__ import annotations

import csv
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .augment import MixupConfig, SpecAugmentConfig, mixup_shuffled, spec_augment
from .errors import ConfigError, NumericalError, ValidationError
from .losses import cross_entropy_loss, kl_mixup_loss
from .nn.network import Network
from .nn.optim import AdamState, adam_step

log = logging.getLogger(__name__)

LOSS_KINDS = ("kl_mixup", "cross_entropy")


@dataclass(frozen=True)
class TrainingConfig:
    epochs: int = 100
    l2: float = 1e-4
    learning_rate: float = 1e-3
    batch_size: int = 32
    loss: str = "kl_mixup"
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.l2 < 0:
            raise ConfigError("l2 coefficient must be >= 0")
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.loss not in LOSS_KINDS:
            raise ConfigError(f"loss must be one of {LOSS_KINDS}, got {self.loss!r}")


@dataclass
class EpochStats:
    epoch: int
    mean_loss: float
    train_acc: float


@dataclass
class TrainResult:
    curve: list[EpochStats] = field(default_factory=list)
    steps: int = 0

    @property
    def losses(self) -> list[float]:
        return [e.mean_loss for e in self.curve]


def one_hot(labels, class_count: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=int)
    out = np.zeros((labels.size, class_count))
    out[np.arange(labels.size), labels] = 1.0
    return out


def _step_loss(net: Network, probs, targets, cfg: TrainingConfig):
    if cfg.loss == "cross_entropy":
        return cross_entropy_loss(probs, targets)
    params = net.parameters().values() if cfg.l2 else ()
    return kl_mixup_loss(probs, targets, params, cfg.l2)


def train(net: Network, patches, labels, cfg: TrainingConfig,
          mixup: MixupConfig | None = None, specaug: SpecAugmentConfig | None = None,
          on_epoch=None) -> TrainResult:
    """Train ``net`` in place on patches [N, H, W, C] with integer labels.

    ``train_acc`` in the curve is measured on the augmented batches against
    the dominant target class, so it is cheap but noisy.
    """
    patches = np.asarray(patches, dtype=net.dtype)
    labels = np.asarray(labels, dtype=int)
    if len(patches) == 0 or len(patches) != len(labels):
        raise ValidationError("training set is empty or labels do not match patches")
    class_count = net.spec.class_count
    targets_all = one_hot(labels, class_count)
    if specaug is not None and specaug.enabled:
        specaug.check_patch(patches.shape[1:])

    rng = np.random.default_rng(cfg.seed)
    state = AdamState(learning_rate=cfg.learning_rate)
    params = net.parameters()
    result = TrainResult()
    n = len(patches)

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        loss_sum, correct = 0.0, 0
        n_batches = 0
        for b, start in enumerate(range(0, n, cfg.batch_size), start=1):
            idx = order[start:start + cfg.batch_size]
            x, y = patches[idx], targets_all[idx]
            if specaug is not None and specaug.enabled:
                x = np.stack([spec_augment(xi, specaug, rng) for xi in x])
            if mixup is not None and mixup.enabled and len(idx) > 1:
                x, y = mixup_shuffled(x, y, mixup, rng)
            probs = net.forward(x, train=True)
            loss, dprobs = _step_loss(net, probs, y, cfg)
            if not np.isfinite(loss):
                raise NumericalError(f"non-finite loss at epoch {epoch}, batch {b}")
            net.backward(dprobs.astype(net.dtype))
            grads = net.gradients()
            if cfg.loss == "kl_mixup" and cfg.l2:
                grads = {k: g + cfg.l2 * params[k] for k, g in grads.items()}
            try:
                adam_step(params, grads, state)
            except NumericalError as exc:
                raise NumericalError(f"epoch {epoch}, batch {b}: {exc}") from exc
            loss_sum += loss
            n_batches += 1
            correct += int(np.sum(probs.argmax(axis=1) == y.argmax(axis=1)))
        stats = EpochStats(epoch, loss_sum / n_batches, correct / n)
        result.curve.append(stats)
        result.steps = state.step
        log.info("epoch %d loss %.5f train_acc %.3f", epoch, stats.mean_loss, stats.train_acc)
        if on_epoch is not None:
            on_epoch(stats)
    return result


def accuracy(net: Network, patches, labels, batch_size: int = 64) -> float:
    """Inference-mode accuracy of per-patch argmax predictions."""
    probs = net.predict(np.asarray(patches, dtype=net.dtype), batch_size)
    return float(np.mean(probs.argmax(axis=1) == np.asarray(labels)))


def write_loss_curve(path, curve: list[EpochStats]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "mean_loss", "train_acc"])
        for e in curve:
            writer.writerow([e.epoch, f"{e.mean_loss:.8g}", f"{e.train_acc:.6f}"])


def config_dict(cfg: TrainingConfig) -> dict:
    return asdict(cfg)
