"""WAV decoding and dataset manifests."""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DecodeError, UnsupportedFormatError, ValidationError

# DCASE 2021 Task 1A scene names
DEFAULT_LABELS = (
    "airport",
    "bus",
    "metro",
    "metro_station",
    "park",
    "public_square",
    "shopping_mall",
    "street_pedestrian",
    "street_traffic",
    "tram",
)

_FORMAT_PCM = 0x0001
_FORMAT_FLOAT = 0x0003
_FORMAT_EXTENSIBLE = 0xFFFE


@dataclass
class AudioClip:
    samples: np.ndarray
    sample_rate: int
    id: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise ValidationError("audio clip must be a nonempty 1-d sample buffer")
        if not np.all(np.isfinite(self.samples)):
            raise ValidationError(f"clip {self.id!r} contains non-finite samples")
        if np.max(np.abs(self.samples)) > 1.0:
            raise ValidationError(f"clip {self.id!r} has samples outside [-1, 1]")
        if int(self.sample_rate) <= 0:
            raise ValidationError(f"sample rate must be positive, got {self.sample_rate}")
        self.sample_rate = int(self.sample_rate)

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    scene_label: str
    device_id: str = ""
    city: str | None = None
    split: str = "train"

    @property
    def recording_id(self) -> str:
        return recording_id(self.path)


def recording_id(path: str) -> str:
    """Stable identifier derived from a manifest path (directory separators flattened)."""
    p = Path(path)
    return "__".join(p.with_suffix("").parts)


def read_wav(path, *, clip_id: str | None = None) -> AudioClip:
    """Decode a mono RIFF/WAVE file holding 16-bit PCM or 32-bit float samples."""
    path = Path(path)
    data = path.read_bytes()
    if len(data) < 12:
        raise DecodeError(f"{path}: truncated RIFF header at offset 0")
    if data[0:4] != b"RIFF":
        raise DecodeError(f"{path}: missing RIFF tag at offset 0")
    if data[8:12] != b"WAVE":
        raise DecodeError(f"{path}: missing WAVE tag at offset 8")

    fmt = None
    payload = None
    offset = 12
    while offset + 8 <= len(data):
        tag = data[offset:offset + 4]
        (size,) = struct.unpack_from("<I", data, offset + 4)
        body = offset + 8
        if body + size > len(data):
            # tolerate an overlong data chunk size from streaming writers
            if tag != b"data":
                raise DecodeError(f"{path}: chunk {tag!r} at offset {offset} overruns file")
            size = len(data) - body
        if tag == b"fmt ":
            if size < 16:
                raise DecodeError(f"{path}: fmt chunk too short at offset {offset}")
            fmt = struct.unpack_from("<HHIIHH", data, body)
            if fmt[0] == _FORMAT_EXTENSIBLE and size >= 40:
                (sub,) = struct.unpack_from("<H", data, body + 24)
                fmt = (sub,) + fmt[1:]
        elif tag == b"data":
            if fmt is None:
                raise DecodeError(f"{path}: data chunk before fmt chunk at offset {offset}")
            payload = (body, size)
            break
        offset = body + size + (size & 1)

    if fmt is None:
        raise DecodeError(f"{path}: no fmt chunk found (scanned to offset {offset})")
    if payload is None:
        raise DecodeError(f"{path}: no data chunk found (scanned to offset {offset})")

    format_tag, channels, sample_rate, _, block_align, bits = fmt
    if channels != 1:
        raise UnsupportedFormatError(
            f"{path}: {channels} channels; only mono input is supported"
        )
    start, size = payload
    if size == 0:
        raise DecodeError(f"{path}: empty data chunk at offset {start - 8}")
    if format_tag == _FORMAT_PCM and bits == 16:
        samples = np.frombuffer(data, dtype="<i2", count=size // 2, offset=start)
        samples = samples.astype(np.float64) / 32768.0
    elif format_tag == _FORMAT_FLOAT and bits == 32:
        samples = np.frombuffer(data, dtype="<f4", count=size // 4, offset=start)
        samples = samples.astype(np.float64)
    else:
        raise UnsupportedFormatError(
            f"{path}: format tag {format_tag:#06x} with {bits} bits is not supported"
        )
    if samples.size == 0:
        raise DecodeError(f"{path}: data chunk at offset {start - 8} holds no whole sample")
    if not np.all(np.isfinite(samples)):
        raise DecodeError(f"{path}: non-finite float samples in data chunk at offset {start - 8}")
    np.clip(samples, -1.0, 1.0, out=samples)
    return AudioClip(samples, sample_rate, clip_id if clip_id is not None else path.stem)


def write_wav(path, clip: AudioClip, *, encoding: str = "pcm16") -> None:
    """Write a mono WAV file. ``encoding`` is ``"pcm16"`` or ``"float32"``."""
    if encoding == "pcm16":
        pcm = np.clip(np.round(clip.samples * 32768.0), -32768, 32767).astype("<i2")
        format_tag, bits = _FORMAT_PCM, 16
    elif encoding == "float32":
        pcm = clip.samples.astype("<f4")
        format_tag, bits = _FORMAT_FLOAT, 32
    else:
        raise ValidationError(f"unknown wav encoding {encoding!r}")
    body = pcm.tobytes()
    block_align = bits // 8
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(body), b"WAVE",
        b"fmt ", 16, format_tag, 1, clip.sample_rate,
        clip.sample_rate * block_align, block_align, bits,
        b"data", len(body),
    )
    Path(path).write_bytes(header + body)


def _sniff_delimiter(header_line: str) -> str:
    return "\t" if "\t" in header_line else ","


def load_manifest(path, label_set: Sequence[str] = DEFAULT_LABELS) -> list[ManifestEntry]:
    """Parse a delimited manifest with at least ``filename`` and ``scene_label`` columns."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read manifest {path}: {exc}") from exc
    lines = text.splitlines()
    if not lines:
        raise ValidationError(f"{path}: manifest is empty")
    reader = csv.DictReader(lines, delimiter=_sniff_delimiter(lines[0]))
    fields = set(reader.fieldnames or ())
    missing = {"filename", "scene_label"} - fields
    if missing:
        raise ValidationError(f"{path}: header lacks column(s) {sorted(missing)}")

    labels = set(label_set)
    entries = []
    for row_number, row in enumerate(reader, start=2):
        if not any((v or "").strip() for v in row.values()):
            continue
        label = (row.get("scene_label") or "").strip()
        if label not in labels:
            raise ValidationError(f"{path}: row {row_number}: unknown scene_label {label!r}")
        split = (row.get("split") or "").strip() or "train"
        if split not in ("train", "eval"):
            raise ValidationError(f"{path}: row {row_number}: split must be train or eval, got {split!r}")
        filename = (row.get("filename") or "").strip()
        if not filename:
            raise ValidationError(f"{path}: row {row_number}: empty filename")
        entries.append(ManifestEntry(
            path=filename,
            scene_label=label,
            device_id=(row.get("device") or "").strip(),
            city=(row.get("city") or "").strip() or None,
            split=split,
        ))
    return entries


def write_manifest(path, entries: Sequence[ManifestEntry]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(["filename", "scene_label", "device", "city", "split"])
        for e in entries:
            writer.writerow([e.path, e.scene_label, e.device_id, e.city or "", e.split])
