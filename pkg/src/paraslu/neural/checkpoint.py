"""Portable checkpoints: a JSON manifest followed by a little-endian float32 blob.

Layout::

    8 bytes   manifest length, little-endian uint64
    N bytes   manifest, canonical JSON (sorted keys, compact separators)
    M bytes   tensors concatenated in manifest order (sorted by name)
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import Dict, Mapping

import numpy as np

FORMAT = "paraslu-checkpoint/1"
_LEN = struct.Struct("<Q")
_F32 = np.dtype("<f4")


class CheckpointError(Exception):
    pass


class TruncatedCheckpointError(CheckpointError):
    pass


class ManifestMismatchError(CheckpointError):
    pass


class ShapeMismatchError(CheckpointError):
    pass


class VocabMismatchError(CheckpointError):
    pass


@dataclass
class Checkpoint:
    tensors: Dict[str, np.ndarray]
    metadata: dict = field(default_factory=dict)


def _canonical(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def to_bytes(tensors: Mapping[str, np.ndarray], metadata: Mapping | None = None) -> bytes:
    entries, blobs, offset = [], [], 0
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype=_F32)
        raw = arr.tobytes()
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    manifest = _canonical({
        "format": FORMAT,
        "metadata": dict(metadata or {}),
        "tensors": entries,
        "blob_bytes": offset,
    })
    return _LEN.pack(len(manifest)) + manifest + b"".join(blobs)


def from_bytes(data: bytes, vocab_hash: str | None = None,
               expected_shapes: Mapping[str, tuple] | None = None) -> Checkpoint:
    if len(data) < _LEN.size:
        raise TruncatedCheckpointError("file shorter than header")
    (mlen,) = _LEN.unpack_from(data)
    if len(data) < _LEN.size + mlen:
        raise TruncatedCheckpointError("file shorter than declared manifest")
    try:
        manifest = json.loads(data[_LEN.size:_LEN.size + mlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ManifestMismatchError(f"unreadable manifest: {exc}") from None
    if not isinstance(manifest, dict) or manifest.get("format") != FORMAT:
        raise ManifestMismatchError("not a checkpoint manifest")
    blob = data[_LEN.size + mlen:]
    declared = manifest.get("blob_bytes")
    if not isinstance(declared, int):
        raise ManifestMismatchError("manifest lacks blob size")
    if len(blob) < declared:
        raise TruncatedCheckpointError(f"blob has {len(blob)} of {declared} bytes")
    if len(blob) > declared:
        raise ManifestMismatchError(f"blob has {len(blob)} bytes, manifest declares {declared}")

    tensors = {}
    offset = 0
    for entry in manifest["tensors"]:
        name, shape = entry["name"], tuple(entry["shape"])
        if entry["offset"] != offset:
            raise ManifestMismatchError(f"{name}: offset {entry['offset']} != expected {offset}")
        n = int(np.prod(shape, dtype=np.int64)) * _F32.itemsize
        if entry["nbytes"] != n:
            raise ShapeMismatchError(f"{name}: shape {shape} needs {n} bytes, manifest says {entry['nbytes']}")
        if offset + n > declared:
            raise ManifestMismatchError(f"{name}: extends past the blob")
        tensors[name] = np.frombuffer(blob, dtype=_F32, count=n // 4, offset=offset).reshape(shape).astype(np.float32)
        offset += n
    if offset != declared:
        raise ManifestMismatchError(f"tensors cover {offset} of {declared} blob bytes")

    metadata = manifest.get("metadata", {})
    if vocab_hash is not None and metadata.get("vocab_hash") != vocab_hash:
        raise VocabMismatchError("checkpoint was saved with a different vocabulary")
    if expected_shapes is not None:
        for name, shape in expected_shapes.items():
            if name not in tensors:
                raise ShapeMismatchError(f"missing tensor {name}")
            if tensors[name].shape != tuple(shape):
                raise ShapeMismatchError(f"{name}: {tensors[name].shape} != {tuple(shape)}")
    return Checkpoint(tensors, metadata)


def save_checkpoint(tensors: Mapping[str, np.ndarray], metadata: Mapping | None, path: str) -> None:
    with open(path, "wb") as f:
        f.write(to_bytes(tensors, metadata))


def load_checkpoint(path: str, vocab_hash: str | None = None,
                    expected_shapes: Mapping[str, tuple] | None = None) -> Checkpoint:
    with open(path, "rb") as f:
        return from_bytes(f.read(), vocab_hash, expected_shapes)
