"""Run configuration: one JSON/TOML file covering every stage, unknown keys rejected."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .audio_io import DEFAULT_LABELS
from .augment import MixupConfig, SpecAugmentConfig
from .errors import ConfigError
from .frontend import FrontendConfig
from .training import TrainingConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass(frozen=True)
class PatchConfig:
    frames: int = 128
    overlap: float = 0.5

    def __post_init__(self):
        if self.frames < 1 or not 0.0 <= self.overlap < 1.0:
            raise ConfigError("patch.frames must be >= 1 and patch.overlap in [0, 1)")


@dataclass(frozen=True)
class ModelConfig:
    variant: str = "crdc"


@dataclass(frozen=True)
class AugmentConfig:
    mixup: MixupConfig = field(default_factory=MixupConfig)
    spec: SpecAugmentConfig = field(default_factory=SpecAugmentConfig)


@dataclass(frozen=True)
class PathsConfig:
    manifest: str = "manifest.tsv"
    audio_root: str = "."
    features: str = "features"
    runs: str = "runs"


@dataclass(frozen=True)
class RunConfig:
    labels: tuple[str, ...] = DEFAULT_LABELS
    expected_sample_rate: int = 44100
    seed: int = 0
    frontend: FrontendConfig = field(default_factory=FrontendConfig)
    patch: PatchConfig = field(default_factory=PatchConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)
    base_dir: str = field(default=".", compare=False)

    def __post_init__(self):
        if len(self.labels) < 2 or len(set(self.labels)) != len(self.labels):
            raise ConfigError("labels must list at least two distinct class names")
        if self.expected_sample_rate <= 0:
            raise ConfigError("expected_sample_rate must be positive")

    def resolve(self, rel: str) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def frontend_for(self, kind: str) -> FrontendConfig:
        return self.frontend.with_kind(kind)

    def training_config(self) -> TrainingConfig:
        return dataclasses.replace(self.training, seed=self.seed)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("base_dir")
        d["labels"] = list(self.labels)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def hash(self) -> str:
        """Short digest of everything except file locations."""
        d = self.to_dict()
        d.pop("paths")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:12]


def _build(cls, data, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a table, got {type(data).__name__}")
    fields = {f.name: f for f in dataclasses.fields(cls) if f.init and f.name != "base_dir"}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {unknown}")
    kwargs = {}
    for name, value in data.items():
        ftype = fields[name].default_factory if fields[name].default_factory is not dataclasses.MISSING else None
        if ftype is not None and dataclasses.is_dataclass(ftype):
            kwargs[name] = _build(ftype, value, f"{where}.{name}" if where else name)
        elif name == "labels":
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{where or 'config'}: {exc}") from exc


def run_config_from_dict(data: dict, base_dir=".") -> RunConfig:
    cfg = _build(RunConfig, data, "")
    return dataclasses.replace(cfg, base_dir=str(base_dir))


def load_run_config(path) -> RunConfig:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        data = tomllib.loads(text) if path.suffix == ".toml" else json.loads(text)
    except ValueError as exc:
        raise ConfigError(f"{path}: cannot parse config: {exc}") from exc
    return run_config_from_dict(data, path.parent)
