"""Checkpoint files: a JSON header followed by a raw little-endian parameter blob.

Layout::

    b"TWCK" | u32 version | u64 header_bytes | header (UTF-8 JSON) | blob

The header lists every array (name, dtype, shape, offset) and the SHA-256 of
the blob; loading verifies the digest so a tampered file is never reused.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"TWCK"
VERSION = 1
_PREFIX = struct.Struct("<4sIQ")


class CorruptCheckpoint(ValueError):
    pass


def save_checkpoint(path, header: dict, arrays: dict[str, np.ndarray]) -> str:
    """Write ``arrays`` plus ``header`` metadata; returns the blob digest."""
    entries = []
    chunks = []
    offset = 0
    for name in sorted(arrays):
        a = np.ascontiguousarray(arrays[name])
        dt = a.dtype.newbyteorder("<")
        raw = a.astype(dt, copy=False).tobytes()
        entries.append({"name": name, "dtype": dt.str, "shape": list(a.shape), "offset": offset})
        chunks.append(raw)
        offset += len(raw)
    blob = b"".join(chunks)
    digest = hashlib.sha256(blob).hexdigest()
    full = dict(header)
    full["arrays"] = entries
    full["blob_bytes"] = len(blob)
    full["blob_sha256"] = digest
    text = json.dumps(full, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(_PREFIX.pack(MAGIC, VERSION, len(text)))
        fh.write(text)
        fh.write(blob)
    return digest


def load_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    data = Path(path).read_bytes()
    if len(data) < _PREFIX.size:
        raise CorruptCheckpoint(f"{path}: truncated prefix")
    magic, version, hlen = _PREFIX.unpack_from(data)
    if magic != MAGIC or version != VERSION:
        raise CorruptCheckpoint(f"{path}: bad magic/version")
    start = _PREFIX.size
    try:
        header = json.loads(data[start : start + hlen])
    except ValueError as exc:
        raise CorruptCheckpoint(f"{path}: unreadable header") from exc
    blob = data[start + hlen :]
    if len(blob) != header.get("blob_bytes") or hashlib.sha256(blob).hexdigest() != header.get("blob_sha256"):
        raise CorruptCheckpoint(f"{path}: parameter blob does not match its recorded hash")
    arrays = {}
    for e in header.pop("arrays"):
        dt = np.dtype(e["dtype"])
        n = int(np.prod(e["shape"], dtype=np.int64)) * dt.itemsize
        arrays[e["name"]] = (
            np.frombuffer(blob, dtype=dt, count=n // dt.itemsize, offset=e["offset"]).reshape(e["shape"]).copy()
        )
    return header, arrays
