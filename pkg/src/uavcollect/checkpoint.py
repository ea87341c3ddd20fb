"""Portable parameter checkpoints.

Layout: one line of UTF-8 JSON (the header) terminated by ``\\n``, followed by
the concatenated tensors as little-endian float64. The header lists every
tensor's name, shape and byte offset, carries free-form metadata and the
SHA-256 of the payload.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

FORMAT = "uavcollect-checkpoint"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save(path, tensors: dict, meta: dict | None = None) -> str:
    entries = []
    chunks = []
    offset = 0
    for name, arr in tensors.items():
        a = np.asarray(arr, dtype="<f8")
        raw = a.tobytes()
        entries.append({"name": name, "shape": list(a.shape), "offset": offset, "nbytes": len(raw)})
        chunks.append(raw)
        offset += len(raw)
    payload = b"".join(chunks)
    digest = hashlib.sha256(payload).hexdigest()
    header = {"format": FORMAT, "version": VERSION, "dtype": "<f8", "tensors": entries,
              "payload_bytes": len(payload), "sha256": digest, "meta": meta or {}}
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(payload)
    return digest


def load(path):
    """Returns ``(tensors, meta)``; raises ``CheckpointError`` on any inconsistency."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    cut = blob.find(b"\n")
    if cut < 0:
        raise CheckpointError("missing checkpoint header")
    try:
        header = json.loads(blob[:cut].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable checkpoint header: {exc}") from exc
    if header.get("format") != FORMAT or header.get("version") != VERSION:
        raise CheckpointError("not a checkpoint of a supported format/version")
    payload = blob[cut + 1:]
    if len(payload) != header["payload_bytes"]:
        raise CheckpointError("payload length does not match header")
    if hashlib.sha256(payload).hexdigest() != header["sha256"]:
        raise CheckpointError("checksum mismatch; checkpoint is corrupted")
    tensors = {}
    for e in header["tensors"]:
        raw = payload[e["offset"]:e["offset"] + e["nbytes"]]
        tensors[e["name"]] = np.frombuffer(raw, dtype="<f8").reshape(tuple(e["shape"])).astype(float)
    return tensors, header["meta"]
