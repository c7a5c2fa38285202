"""Binary named-tensor checkpoints.

Layout::

    b"TGA1" | u32 little-endian header length | UTF-8 JSON header | payloads

The header holds ``format_version``, ``config``, ``seed``, ``meta`` and an
ordered ``tensors`` list of ``{name, rows, cols}``. Payloads are the tensors'
little-endian float64 data, contiguous, in header order.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from tga.errors import BadMagicError, CheckpointError, TruncatedPayloadError, VersionMismatchError

MAGIC = b"TGA1"
FORMAT_VERSION = 1
_DTYPE = np.dtype("<f8")


@dataclass(eq=False)
class Checkpoint:
    tensors: dict[str, np.ndarray]
    config: dict = field(default_factory=dict)
    seed: int = 0
    meta: dict = field(default_factory=dict)
    version: int = FORMAT_VERSION

    def has(self, prefix: str) -> bool:
        return any(name.startswith(prefix) for name in self.tensors)

    def equals(self, other: Checkpoint) -> bool:
        """Bitwise equality of tensors (including order) and metadata."""
        if list(self.tensors) != list(other.tensors):
            return False
        for name, a in self.tensors.items():
            b = other.tensors[name]
            if a.shape != b.shape or np.asarray(a, _DTYPE).tobytes() != np.asarray(b, _DTYPE).tobytes():
                return False
        return (self.config, self.seed, self.meta, self.version) == (
            other.config,
            other.seed,
            other.meta,
            other.version,
        )


def to_bytes(ckpt: Checkpoint) -> bytes:
    entries = []
    payloads = []
    for name, arr in ckpt.tensors.items():
        arr = np.asarray(arr, dtype=_DTYPE)
        if arr.ndim != 2:
            raise CheckpointError(f"tensor {name!r} must be 2-D, got shape {arr.shape}")
        entries.append({"name": name, "rows": arr.shape[0], "cols": arr.shape[1]})
        payloads.append(np.ascontiguousarray(arr).tobytes())
    header = {
        "format_version": ckpt.version,
        "config": ckpt.config,
        "seed": ckpt.seed,
        "meta": ckpt.meta,
        "tensors": entries,
    }
    raw = json.dumps(header, allow_nan=False).encode("utf-8")
    return MAGIC + struct.pack("<I", len(raw)) + raw + b"".join(payloads)


def from_bytes(blob: bytes) -> Checkpoint:
    if blob[:4] != MAGIC:
        raise BadMagicError(f"not a TGA1 checkpoint (magic {blob[:4]!r})")
    if len(blob) < 8:
        raise TruncatedPayloadError("file ends inside the header length field")
    (hlen,) = struct.unpack("<I", blob[4:8])
    if len(blob) < 8 + hlen:
        raise TruncatedPayloadError(f"header declares {hlen} bytes, only {len(blob) - 8} present")
    try:
        header = json.loads(blob[8 : 8 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable header: {exc}") from None
    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"format version {version!r}, expected {FORMAT_VERSION}")

    entries = header.get("tensors", [])
    expected = sum(e["rows"] * e["cols"] for e in entries) * _DTYPE.itemsize
    payload = blob[8 + hlen :]
    if len(payload) != expected:
        raise TruncatedPayloadError(f"header describes {expected} payload bytes, found {len(payload)}")

    tensors = {}
    offset = 0
    for e in entries:
        n = e["rows"] * e["cols"]
        arr = np.frombuffer(payload, dtype=_DTYPE, count=n, offset=offset)
        tensors[e["name"]] = arr.reshape(e["rows"], e["cols"]).astype(np.float64)
        offset += n * _DTYPE.itemsize
    return Checkpoint(
        tensors=tensors,
        config=header.get("config", {}),
        seed=header.get("seed", 0),
        meta=header.get("meta", {}),
        version=version,
    )


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    Path(path).write_bytes(to_bytes(ckpt))


def load_checkpoint(path: str | Path) -> Checkpoint:
    return from_bytes(Path(path).read_bytes())
