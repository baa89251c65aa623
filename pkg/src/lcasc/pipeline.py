"""Stage functions behind the CLI: extract, train, eval."""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .audio_io import ManifestEntry, load_manifest, read_wav
from .cnn7 import build_cnn7
from .config import RunConfig
from .errors import ConfigError, LcascError, ValidationError
from .evaluation import EvalReport, EvalSample, evaluate
from .feature_cache import is_cached, load_cached, write_features
from .frontend import FrontendConfig, Spectrogram, compute_spectrogram, split_patches
from .nn.network import Network, load_checkpoint, save_checkpoint
from .training import train, write_loss_curve

log = logging.getLogger(__name__)


@dataclass
class ExtractSummary:
    computed: list[str] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)
    failed: dict[str, str] = field(default_factory=dict)


def feature_dir(cfg: RunConfig, kind: str) -> Path:
    return cfg.resolve(cfg.paths.features) / kind


def run_dir(cfg: RunConfig, branch: str) -> Path:
    return cfg.resolve(cfg.paths.runs) / branch / cfg.hash()


def spectrogram_for(entry: ManifestEntry, audio_root: Path, fcfg: FrontendConfig,
                    expected_rate: int) -> Spectrogram:
    clip = read_wav(audio_root / entry.path, clip_id=entry.recording_id)
    if clip.sample_rate != expected_rate:
        raise ValidationError(
            f"{entry.path}: sample rate {clip.sample_rate} Hz, expected {expected_rate} Hz "
            "(resampling is not performed)")
    return compute_spectrogram(clip, fcfg)


def _extract_one(args):
    entry, audio_root, fcfg, expected_rate, out_dir = args
    try:
        spec = spectrogram_for(entry, audio_root, fcfg, expected_rate)
        write_features(out_dir, entry.recording_id, spec, fcfg)
        return entry.recording_id, None
    except (LcascError, OSError) as exc:
        return entry.recording_id, f"{type(exc).__name__}: {exc}"


def extract(cfg: RunConfig, kind: str, entries: Sequence[ManifestEntry], out_dir=None,
            jobs: int = 1) -> ExtractSummary:
    """Compute and cache spectrograms; entries whose cache matches the config are skipped."""
    fcfg = cfg.frontend_for(kind)
    out_dir = Path(out_dir) if out_dir is not None else feature_dir(cfg, kind)
    audio_root = cfg.resolve(cfg.paths.audio_root)
    summary = ExtractSummary()
    todo = []
    for e in entries:
        if is_cached(out_dir, e.recording_id, fcfg):
            summary.skipped.append(e.recording_id)
        else:
            todo.append((e, audio_root, fcfg, cfg.expected_sample_rate, out_dir))
    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_extract_one, todo))
    else:
        results = [_extract_one(t) for t in todo]
    for rec_id, err in results:
        if err is None:
            summary.computed.append(rec_id)
        else:
            summary.failed[rec_id] = err
            log.error("extract %s failed: %s", rec_id, err)
    return summary


def load_manifest_for(cfg: RunConfig, manifest=None) -> list[ManifestEntry]:
    return load_manifest(manifest or cfg.resolve(cfg.paths.manifest), cfg.labels)


def branch_patches(cfg: RunConfig, kind: str, entries: Sequence[ManifestEntry]):
    """Stack cached patches of ``entries`` with their integer labels."""
    fcfg = cfg.frontend_for(kind)
    fdir = feature_dir(cfg, kind)
    label_index = {name: i for i, name in enumerate(cfg.labels)}
    xs, ys, missing = [], [], []
    for e in entries:
        spec = load_cached(fdir, e.recording_id, fcfg)
        if spec is None:
            missing.append(e.recording_id)
            continue
        for p in split_patches(spec, cfg.patch.frames, cfg.patch.overlap, e.recording_id):
            xs.append(p.values)
            ys.append(label_index[e.scene_label])
    if missing:
        raise ConfigError(
            f"{len(missing)} recording(s) have no {kind} features matching the config in {fdir} "
            f"(first: {missing[0]}); run `lcasc extract --config <config> --kind {kind}` first")
    if not xs:
        raise ConfigError("no training recordings in the manifest")
    return np.stack(xs).astype(np.float32), np.asarray(ys)


def train_branch(cfg: RunConfig, branch: str, manifest=None) -> Path:
    entries = [e for e in load_manifest_for(cfg, manifest) if e.split == "train"]
    x, y = branch_patches(cfg, branch, entries)
    spec = build_cnn7(cfg.model.variant, len(cfg.labels), x.shape[1:])
    net = Network(spec, seed=cfg.seed)
    out = run_dir(cfg, branch)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(cfg.to_json())
    log.info("training %s on %d patches from %d recordings -> %s", branch, len(x), len(entries), out)
    result = train(net, x, y, cfg.training_config(), cfg.augment.mixup, cfg.augment.spec)
    write_loss_curve(out / "loss.csv", result.curve)
    save_checkpoint(out / "model.ckpt", net, {"branch": branch, "config_hash": cfg.hash(),
                                              "labels": list(cfg.labels)})
    return out


def load_branch_model(path, branch: str, labels: Sequence[str]) -> Network:
    net, header = load_checkpoint(path)
    meta = header.get("meta", {})
    if meta.get("branch") not in (None, branch):
        raise ConfigError(f"checkpoint {path} was trained on branch {meta['branch']}, not {branch}")
    if meta.get("labels") is not None and list(meta["labels"]) != list(labels):
        raise ConfigError(f"checkpoint {path} label set does not match the config")
    return net


def eval_samples(cfg: RunConfig, branches: Sequence[str], entries: Sequence[ManifestEntry]):
    label_index = {name: i for i, name in enumerate(cfg.labels)}
    audio_root = cfg.resolve(cfg.paths.audio_root)
    for e in entries:
        specs = {}
        for b in branches:
            fcfg = cfg.frontend_for(b)
            spec = load_cached(feature_dir(cfg, b), e.recording_id, fcfg)
            if spec is None:
                spec = spectrogram_for(e, audio_root, fcfg, cfg.expected_sample_rate)
            specs[b] = spec
        yield EvalSample(e.recording_id, label_index[e.scene_label], e.device_id, specs)


def eval_branches(cfg: RunConfig, checkpoints: dict[str, Path], fuse: bool, out_dir: Path,
                  manifest=None) -> dict[str, EvalReport]:
    """Write one report per branch and, with ``fuse``, the fused report."""
    entries = [e for e in load_manifest_for(cfg, manifest) if e.split == "eval"]
    if not entries:
        raise ConfigError("manifest has no eval-split recordings")
    models = {b: load_branch_model(p, b, cfg.labels) for b, p in checkpoints.items()}
    reports: dict[str, EvalReport] = {}
    for b in sorted(models):
        reports[b] = evaluate({b: models[b]}, eval_samples(cfg, [b], entries), cfg.labels,
                              False, cfg.patch.frames, cfg.patch.overlap)
    if fuse:
        reports["fused"] = evaluate(models, eval_samples(cfg, sorted(models), entries), cfg.labels,
                                    True, cfg.patch.frames, cfg.patch.overlap)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, rep in reports.items():
        (out_dir / f"report_{name}.json").write_text(rep.to_json())
        (out_dir / f"report_{name}.txt").write_text(rep.to_text())
    (out_dir / "config.json").write_text(cfg.to_json())
    (out_dir / "metadata.json").write_text(json.dumps({
        "created_unix": time.time(),
        "checkpoints": {b: str(p) for b, p in sorted(checkpoints.items())},
    }, indent=2) + "\n")
    return reports
