"""Acceleration-record ingest, preprocessing and segmentation.

File formats
------------
CSV
    First row holds ``channels,samples,rate_hz``; each following row holds one
    sample for every channel.
Binary (``.twf``)
    ``b"TWF1"``, u32 channels, u64 samples, f64 rate, then channel-major
    float64 data, all little-endian.

Segment sets are written in the binary layout (one "channel" per segment)
next to a JSON manifest carrying labels, source tags and the preprocessing
configuration.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"TWF1"
_HEADER = struct.Struct("<4sIQd")


class RecordFormatError(ValueError):
    pass


@dataclass
class RawRecord:
    data: np.ndarray  # (channels, samples)
    sample_rate_hz: float
    source_tag: str = ""

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise RecordFormatError("record data must be a (channels, samples) matrix")
        if self.channels < 1 or self.samples_per_channel < 2:
            raise RecordFormatError(f"record too small: {self.data.shape}")
        if not self.sample_rate_hz > 0:
            raise RecordFormatError(f"sample rate must be positive, got {self.sample_rate_hz}")
        bad = np.argwhere(~np.isfinite(self.data))
        if len(bad):
            ch, i = bad[0]
            raise RecordFormatError(f"non-finite sample at ({ch},{i})")

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def samples_per_channel(self) -> int:
        return self.data.shape[1]


@dataclass
class PreprocessConfig:
    segment_length: int = 1201
    overlap: int = 0
    detrend: str = "linear"
    standardize: bool = True
    augmentation_noise_std: float = 0.0
    whole_record_detrend: bool = False

    def __post_init__(self):
        if self.segment_length < 2:
            raise ValueError("segment_length must be >= 2")
        if not 0 <= self.overlap < self.segment_length:
            raise ValueError("overlap must satisfy 0 <= overlap < segment_length")
        if self.detrend not in ("linear", "none"):
            raise ValueError(f"unknown detrend mode {self.detrend!r}")
        if self.augmentation_noise_std < 0:
            raise ValueError("augmentation_noise_std must be >= 0")


@dataclass
class Segment:
    values: np.ndarray
    channel_index: int = 0
    window_index: int = 0
    condition_label: int = 0
    source_tag: str = ""


@dataclass
class SegmentSet:
    segments: list[Segment] = field(default_factory=list)
    sample_rate_hz: float = 100.0

    @property
    def counts_per_label(self) -> dict[int, int]:
        counts: dict[int, int] = {}
        for s in self.segments:
            counts[s.condition_label] = counts.get(s.condition_label, 0) + 1
        return dict(sorted(counts.items()))

    @property
    def length(self) -> int:
        return len(self.segments[0].values) if self.segments else 0

    def __len__(self):
        return len(self.segments)

    def matrix(self) -> np.ndarray:
        return np.stack([s.values for s in self.segments]) if self.segments else np.empty((0, 0))

    def labels(self) -> np.ndarray:
        return np.array([s.condition_label for s in self.segments], dtype=np.int64)

    def validate(self, require_both_labels=False):
        lengths = {len(s.values) for s in self.segments}
        if len(lengths) > 1:
            raise ValueError(f"segments have mixed lengths {sorted(lengths)}")
        if require_both_labels and set(self.counts_per_label) != {0, 1}:
            raise ValueError(f"both condition labels required, have {self.counts_per_label}")


def merge(*sets: SegmentSet) -> SegmentSet:
    rates = {s.sample_rate_hz for s in sets}
    if len(rates) != 1:
        raise ValueError(f"cannot merge sets with sample rates {sorted(rates)}")
    out = SegmentSet([seg for s in sets for seg in s.segments], rates.pop())
    out.validate()
    return out


# --- preprocessing ----------------------------------------------------------


def detrend_linear(values) -> np.ndarray:
    """Remove the least-squares line ``a + b t`` from ``values``."""
    y = np.asarray(values, dtype=np.float64)
    n = len(y)
    if n < 2:
        raise ValueError("detrend needs at least 2 samples")
    t = np.arange(n) - (n - 1) / 2.0  # centred, so slope and intercept decouple
    slope = (t @ y) / (t @ t)
    return y - y.mean() - slope * t


def standardize(values) -> np.ndarray:
    """Zero mean, unit population standard deviation."""
    y = np.asarray(values, dtype=np.float64)
    centred = y - y.mean()
    sd = np.sqrt(np.mean(centred**2))
    if sd <= 1e-12:
        raise ValueError("cannot standardize a near-constant signal")
    return centred / sd


def preprocess(values, cfg: PreprocessConfig) -> np.ndarray:
    y = np.asarray(values, dtype=np.float64)
    if cfg.detrend == "linear":
        y = detrend_linear(y)
    if cfg.standardize:
        y = standardize(y)
    return y


def window_count(n_samples: int, length: int, overlap: int = 0) -> int:
    if n_samples < length:
        return 0
    return (n_samples - length) // (length - overlap) + 1


def segment_record(record: RawRecord, cfg: PreprocessConfig, label: int) -> SegmentSet:
    """Cut every channel into windows and preprocess each one.

    Segments from all channels are pooled into one set.
    """
    if label not in (0, 1):
        raise ValueError(f"label must be 0 or 1, got {label}")
    L = cfg.segment_length
    n = window_count(record.samples_per_channel, L, cfg.overlap)
    if n == 0:
        raise ValueError(f"record has {record.samples_per_channel} samples, shorter than one {L}-sample window")
    hop = L - cfg.overlap
    segments = []
    for ch in range(record.channels):
        x = record.data[ch]
        if cfg.whole_record_detrend:
            x = detrend_linear(x)
        for w in range(n):
            seg = preprocess(x[w * hop : w * hop + L], cfg)
            segments.append(Segment(seg, ch, w, label, record.source_tag))
    return SegmentSet(segments, record.sample_rate_hz)


def segment_rng(seed: int, channel: int, window: int) -> np.random.Generator:
    """Per-segment generator, independent of processing order."""
    return np.random.default_rng(np.random.SeedSequence([seed, channel, window]))


def add_training_noise(segment: Segment, std: float, rng: np.random.Generator) -> Segment:
    if std < 0:
        raise ValueError("noise std must be >= 0")
    if std == 0:
        return segment
    noisy = segment.values + rng.normal(0.0, std, size=len(segment.values))
    return Segment(noisy, segment.channel_index, segment.window_index, segment.condition_label, segment.source_tag)


def augment(segments: SegmentSet, std: float, seed: int) -> SegmentSet:
    if std == 0:
        return segments
    out = []
    for s in segments.segments:
        rng = segment_rng(seed, s.channel_index + 1000 * s.condition_label, s.window_index)
        out.append(add_training_noise(s, std, rng))
    return SegmentSet(out, segments.sample_rate_hz)


# --- file formats -----------------------------------------------------------


def _infer_format(path) -> str:
    return "csv" if str(path).lower().endswith(".csv") else "f64-binary"


def load_record(path, format: str | None = None, source_tag: str | None = None) -> RawRecord:
    path = Path(path)
    fmt = format or _infer_format(path)
    tag = source_tag if source_tag is not None else path.stem
    if fmt == "csv":
        return _load_csv(path, tag)
    if fmt == "f64-binary":
        data, rate = _read_binary(path)
        return RawRecord(data, rate, tag)
    raise ValueError(f"unknown record format {fmt!r}")


def _load_csv(path, tag) -> RawRecord:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise RecordFormatError(f"{path}: empty file")
    head = rows[0]
    if [h.strip() for h in head] == ["channels", "samples", "rate_hz"]:
        rows = rows[1:]
        head = rows[0] if rows else []
    try:
        channels, samples, rate = int(head[0]), int(head[1]), float(head[2])
        if len(head) != 3:
            raise ValueError
    except (ValueError, IndexError) as exc:
        raise RecordFormatError(f"{path}: malformed header {head!r}") from exc
    body = rows[1:]
    if len(body) != samples:
        raise RecordFormatError(f"{path}: header declares {samples} samples, found {len(body)} rows")
    data = np.empty((channels, samples))
    for i, row in enumerate(body):
        if len(row) != channels:
            raise RecordFormatError(f"{path}: row {i} has {len(row)} values, expected {channels}")
        for ch, cell in enumerate(row):
            try:
                data[ch, i] = float(cell)
            except ValueError as exc:
                raise RecordFormatError(f"{path}: unparseable sample at ({ch},{i})") from exc
    return RawRecord(data, rate, tag)


def save_record(record: RawRecord, path, format: str | None = None) -> None:
    fmt = format or _infer_format(path)
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([record.channels, record.samples_per_channel, repr(float(record.sample_rate_hz))])
            for row in record.data.T:
                w.writerow([repr(float(v)) for v in row])
    elif fmt == "f64-binary":
        _write_binary(path, record.data, record.sample_rate_hz)
    else:
        raise ValueError(f"unknown record format {fmt!r}")


def _write_binary(path, data, rate) -> None:
    data = np.ascontiguousarray(data, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, data.shape[0], data.shape[1], float(rate)))
        fh.write(data.tobytes())


def _read_binary(path):
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise RecordFormatError(f"{path}: truncated header")
    magic, channels, samples, rate = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise RecordFormatError(f"{path}: bad magic {magic!r}")
    expected = channels * samples * 8
    if len(raw) - _HEADER.size != expected:
        raise RecordFormatError(f"{path}: channel length mismatch ({len(raw) - _HEADER.size} data bytes, expected {expected})")
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(channels, samples).astype(np.float64)
    return data, rate


def save_segments(segments: SegmentSet, path, cfg: PreprocessConfig | None = None, extra: dict | None = None) -> Path:
    """Write ``<path>`` (binary) and ``<path>.json`` (manifest); returns the manifest path."""
    path = Path(path)
    _write_binary(path, segments.matrix(), segments.sample_rate_hz)
    manifest = {
        "format": "TWF1-segments",
        "count": len(segments),
        "length": segments.length,
        "sample_rate_hz": segments.sample_rate_hz,
        "counts_per_label": {str(k): v for k, v in segments.counts_per_label.items()},
        "preprocess": asdict(cfg) if cfg is not None else None,
        "segments": [
            {"label": s.condition_label, "channel": s.channel_index, "window": s.window_index, "source": s.source_tag}
            for s in segments.segments
        ],
    }
    if extra:
        manifest.update(extra)
    mpath = path.with_name(path.name + ".json")
    mpath.write_text(json.dumps(manifest, indent=1, sort_keys=True))
    return mpath


def load_segments(path) -> SegmentSet:
    path = Path(path)
    data, rate = _read_binary(path)
    manifest = json.loads(path.with_name(path.name + ".json").read_text())
    meta = manifest["segments"]
    if len(meta) != data.shape[0]:
        raise RecordFormatError(f"{path}: manifest lists {len(meta)} segments, binary holds {data.shape[0]}")
    segs = [Segment(data[i].copy(), m["channel"], m["window"], m["label"], m["source"]) for i, m in enumerate(meta)]
    return SegmentSet(segs, rate)
