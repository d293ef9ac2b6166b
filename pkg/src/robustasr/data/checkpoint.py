"""Single-file checkpoint container with checksum and architecture fingerprint.

Layout: magic | u32 version | u64 header length | JSON header | raw little-
endian buffers | sha256 of everything before it.  Loads refuse corrupt
files and version mismatches instead of reinterpreting them.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"RASRCKPT"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    """Corrupt file, version mismatch, or architecture fingerprint mismatch."""


@dataclass
class CheckpointPayload:
    architecture: dict
    tensors: dict            # name -> np.ndarray (float32/float64)
    meta: dict = field(default_factory=dict)


def save_checkpoint(payload: CheckpointPayload, path):
    path = Path(path)
    entries = []
    buffers = []
    offset = 0
    for name in sorted(payload.tensors):
        arr = np.ascontiguousarray(payload.tensors[name])
        if arr.dtype not in (np.float32, np.float64):
            raise CheckpointError(f"tensor {name!r} has unsupported dtype {arr.dtype}")
        raw = arr.astype(arr.dtype.newbyteorder("<")).tobytes()
        entries.append(
            {"name": name, "dtype": str(arr.dtype), "shape": list(arr.shape), "offset": offset, "nbytes": len(raw)}
        )
        buffers.append(raw)
        offset += len(raw)
    header = json.dumps(
        {"architecture": payload.architecture, "tensors": entries, "meta": payload.meta},
        sort_keys=True,
    ).encode("utf-8")

    body = MAGIC + struct.pack("<I", FORMAT_VERSION) + struct.pack("<Q", len(header)) + header + b"".join(buffers)
    blob = body + hashlib.sha256(body).digest()

    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path) -> CheckpointPayload:
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < len(MAGIC) + 12 + 32:
        raise CheckpointError(f"{path}: file truncated")
    body, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise CheckpointError(f"{path}: checksum mismatch (corrupt or truncated file)")
    if body[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: bad magic, not a checkpoint file")
    pos = len(MAGIC)
    (version,) = struct.unpack_from("<I", body, pos)
    pos += 4
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: format version {version} unsupported (expected {FORMAT_VERSION})")
    (hlen,) = struct.unpack_from("<Q", body, pos)
    pos += 8
    header = json.loads(body[pos : pos + hlen].decode("utf-8"))
    pos += hlen
    tensors = {}
    for ent in header["tensors"]:
        start = pos + ent["offset"]
        raw = body[start : start + ent["nbytes"]]
        if len(raw) != ent["nbytes"]:
            raise CheckpointError(f"{path}: tensor {ent['name']!r} truncated")
        arr = np.frombuffer(raw, dtype=np.dtype(ent["dtype"]).newbyteorder("<"))
        tensors[ent["name"]] = arr.reshape(ent["shape"]).astype(ent["dtype"])
    return CheckpointPayload(architecture=header["architecture"], tensors=tensors, meta=header["meta"])


def check_architecture(expected: dict, got: dict, context=""):
    if expected != got:
        raise CheckpointError(
            f"architecture fingerprint mismatch{f' ({context})' if context else ''}: "
            f"expected {json.dumps(expected, sort_keys=True)} but checkpoint carries "
            f"{json.dumps(got, sort_keys=True)}"
        )
