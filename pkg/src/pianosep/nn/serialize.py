"""Parameter blob.

Layout: ``b"PSEPPRM\\0"`` magic, u32 header length, UTF-8 JSON header,
then the float64 little-endian payload. The header records the format
version, the model config, tensor names and shapes, the payload length
and its SHA-256.
"""

from __future__ import annotations

import hashlib
import json
import struct

import numpy as np

from .model import ModelConfig, ParamStore, param_shapes

MAGIC = b"PSEPPRM\0"
FORMAT_VERSION = 1


class BlobError(ValueError):
    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(f"{code}: {message}")


def save_params(params: ParamStore) -> bytes:
    payload = b"".join(np.ascontiguousarray(v, dtype="<f8").tobytes() for v in params.values())
    header = {
        "version": FORMAT_VERSION,
        "config": params.config.to_dict(),
        "tensors": [[k, list(v.shape)] for k, v in params.items()],
        "payload_bytes": len(payload),
        "sha256": hashlib.sha256(payload).hexdigest(),
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    return MAGIC + struct.pack("<I", len(head)) + head + payload


def load_params(blob: bytes) -> ParamStore:
    if len(blob) < len(MAGIC) + 4 or not blob.startswith(MAGIC):
        raise BlobError("corrupted", "not a parameter blob")
    (hlen,) = struct.unpack("<I", blob[len(MAGIC):len(MAGIC) + 4])
    start = len(MAGIC) + 4
    try:
        header = json.loads(blob[start:start + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise BlobError("corrupted", "unreadable header") from None
    if header.get("version") != FORMAT_VERSION:
        raise BlobError("version", f"blob version {header.get('version')}, "
                                   f"expected {FORMAT_VERSION}")
    payload = blob[start + hlen:]
    if len(payload) != header["payload_bytes"] or \
            hashlib.sha256(payload).hexdigest() != header["sha256"]:
        raise BlobError("checksum", "payload length or checksum mismatch")
    try:
        config = ModelConfig(**header["config"])
    except (TypeError, ValueError) as exc:
        raise BlobError("config", str(exc)) from None

    expected = param_shapes(config)
    stored = [(k, tuple(s)) for k, s in header["tensors"]]
    if stored != list(expected.items()):
        raise BlobError("shape-mismatch", "stored tensors do not match the config's shapes")
    store = ParamStore(config)
    offset = 0
    for name, shape in stored:
        size = int(np.prod(shape)) * 8
        store[name] = np.frombuffer(payload[offset:offset + size], dtype="<f8").reshape(shape).copy()
        offset += size
    return store
