"""Flat binary checkpoint format shared by the encoder and the task head.

Layout: 6-byte magic "SCGIR1", 32-byte sha256 of the architecture config,
then every parameter tensor in declaration order as little-endian float64.
Loading verifies the magic, the digest, and the exact byte length, so a
checkpoint only opens against the configuration that produced it.
"""

from __future__ import annotations

import hashlib
from collections import OrderedDict
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import DataFormatError
from .numeric import Tensor

MAGIC = b"SCGIR1"
_DIGEST_BYTES = 32


def save_params(path, config_digest: str, params: Mapping[str, Tensor]) -> None:
    blob = bytearray()
    blob += MAGIC
    blob += bytes.fromhex(config_digest)
    for tensor in params.values():
        blob += tensor.data.astype("<f8").tobytes()
    Path(path).write_bytes(bytes(blob))


def load_params(path, config_digest: str, shapes: "OrderedDict[str, tuple]") -> "OrderedDict[str, Tensor]":
    raw = Path(path).read_bytes()
    if raw[: len(MAGIC)] != MAGIC:
        raise DataFormatError(f"{path}: bad checkpoint magic at offset 0")
    offset = len(MAGIC)
    stored = raw[offset : offset + _DIGEST_BYTES].hex()
    if stored != config_digest:
        raise DataFormatError(
            f"{path}: checkpoint was written for config digest {stored[:12]}..., "
            f"expected {config_digest[:12]}..."
        )
    offset += _DIGEST_BYTES
    out: "OrderedDict[str, Tensor]" = OrderedDict()
    for name, shape in shapes.items():
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        if offset + nbytes > len(raw):
            raise DataFormatError(f"{path}: truncated checkpoint at offset {offset} (parameter {name})")
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=offset).reshape(shape)
        out[name] = Tensor(arr.astype(np.float64))
        offset += nbytes
    if offset != len(raw):
        raise DataFormatError(f"{path}: {len(raw) - offset} trailing bytes after parameters")
    return out


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
