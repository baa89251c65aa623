"""On-disk spectrogram cache.

Layout per recording: ``<id>.feat`` holds a small header (magic, JSON
length, JSON with shape and kind) followed by little-endian float32
values; ``<id>.json`` is the sidecar with the FrontendConfig that
produced it. A cached entry is valid only if the sidecar config equals
the requested one.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import DecodeError
from .frontend import FrontendConfig, Spectrogram

MAGIC = b"LCFEAT01"


def cache_paths(cache_dir, rec_id: str) -> tuple[Path, Path]:
    cache_dir = Path(cache_dir)
    return cache_dir / f"{rec_id}.feat", cache_dir / f"{rec_id}.json"


def write_features(cache_dir, rec_id: str, spec: Spectrogram, cfg: FrontendConfig) -> Path:
    feat_path, side_path = cache_paths(cache_dir, rec_id)
    feat_path.parent.mkdir(parents=True, exist_ok=True)
    header = json.dumps({"shape": list(spec.values.shape), "kind": spec.kind}).encode()
    body = np.ascontiguousarray(spec.values, dtype="<f4").tobytes()
    tmp = feat_path.with_suffix(".feat.tmp")
    tmp.write_bytes(MAGIC + struct.pack("<I", len(header)) + header + body)
    tmp.replace(feat_path)
    side_path.write_text(json.dumps(cfg.to_dict(), sort_keys=True, indent=1) + "\n")
    return feat_path


def read_features(feat_path) -> Spectrogram:
    raw = Path(feat_path).read_bytes()
    if raw[:8] != MAGIC:
        raise DecodeError(f"{feat_path}: not a feature cache file (bad magic at offset 0)")
    (hlen,) = struct.unpack_from("<I", raw, 8)
    header = json.loads(raw[12:12 + hlen])
    shape = tuple(header["shape"])
    values = np.frombuffer(raw, dtype="<f4", offset=12 + hlen)
    if values.size != int(np.prod(shape)):
        raise DecodeError(f"{feat_path}: payload size does not match header shape {shape}")
    return Spectrogram(values.reshape(shape).astype(np.float32), header["kind"])


def is_cached(cache_dir, rec_id: str, cfg: FrontendConfig) -> bool:
    feat_path, side_path = cache_paths(cache_dir, rec_id)
    if not (feat_path.exists() and side_path.exists()):
        return False
    try:
        stored = json.loads(side_path.read_text())
    except (OSError, ValueError):
        return False
    return stored == json.loads(json.dumps(cfg.to_dict()))


def load_cached(cache_dir, rec_id: str, cfg: FrontendConfig) -> Spectrogram | None:
    if not is_cached(cache_dir, rec_id, cfg):
        return None
    return read_features(cache_paths(cache_dir, rec_id)[0])
