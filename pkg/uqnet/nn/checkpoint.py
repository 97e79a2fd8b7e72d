"""
UQNN parameter checkpoint files

Layout (little-endian): magic ``UQNN``, version u16, then until end of file one
record per tensor: name length u16, UTF-8 name, rank u8, rank x u32 dims,
float32 payload.
"""
from __future__ import annotations

import logging
import struct
from pathlib import Path
from typing import Dict

import numpy as np

from uqnet.errors import FormatError
from uqnet.utils.methods import atomic_write_bytes

logger = logging.getLogger(__name__)

MAGIC = b"UQNN"
VERSION = 1


def encode_params(params: Dict[str, np.ndarray]) -> bytes:
    chunks = [MAGIC, struct.pack("<H", VERSION)]
    for name, value in params.items():
        encoded = name.encode("utf-8")
        value = np.asarray(value)
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<B", value.ndim))
        chunks.append(struct.pack(f"<{value.ndim}I", *value.shape))
        chunks.append(np.ascontiguousarray(value, dtype="<f4").tobytes())
    return b"".join(chunks)


def decode_params(payload: bytes) -> Dict[str, np.ndarray]:
    if payload[:4] != MAGIC:
        raise FormatError("Not a UQNN checkpoint: bad magic", 0)
    if len(payload) < 6:
        raise FormatError("Truncated header", len(payload))
    (version,) = struct.unpack_from("<H", payload, 4)
    if version != VERSION:
        raise FormatError(f"Unsupported UQNN version {version}", 4)

    params: Dict[str, np.ndarray] = {}
    offset = 6
    while offset < len(payload):
        start = offset
        try:
            (name_length,) = struct.unpack_from("<H", payload, offset)
            offset += 2
            name_bytes = payload[offset:offset + name_length]
            if len(name_bytes) != name_length:
                raise FormatError("Truncated tensor name", offset)
            name = name_bytes.decode("utf-8")
            offset += name_length
            (rank,) = struct.unpack_from("<B", payload, offset)
            offset += 1
            dims = struct.unpack_from(f"<{rank}I", payload, offset)
            offset += 4 * rank
        except struct.error as error:
            raise FormatError(f"Truncated tensor record: {error}", start) from error
        except UnicodeDecodeError as error:
            raise FormatError("Tensor name is not UTF-8", start) from error
        size = int(np.prod(dims, dtype=np.int64)) * 4
        if offset + size > len(payload):
            raise FormatError(f"Truncated payload of {name!r}", offset)
        params[name] = np.frombuffer(payload, dtype="<f4", count=size // 4, offset=offset).reshape(dims).astype(np.float32)
        offset += size
    return params


def save_params(path: Path | str, params: Dict[str, np.ndarray]) -> Path:
    return atomic_write_bytes(path, encode_params(params))


def load_params(path: Path | str) -> Dict[str, np.ndarray]:
    try:
        payload = Path(path).read_bytes()
    except OSError as error:
        raise FormatError(f"Unable to read checkpoint {path}: {error.strerror}") from error
    return decode_params(payload)
