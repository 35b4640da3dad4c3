"""Versioned binary container for model parameters.

Layout: magic ``FNN1``, one version byte, a little-endian uint32 array
count, then per array: uint16 name length, UTF-8 name, uint8 ndim,
little-endian uint32 dims, and the float64 little-endian payload.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import FormatError

MAGIC = b"FNN1"
VERSION = 1


def save_arrays(path: str | Path, arrays: dict[str, np.ndarray]) -> None:
    with open(path, "wb") as handle:
        handle.write(MAGIC)
        handle.write(struct.pack("<B", VERSION))
        handle.write(struct.pack("<I", len(arrays)))
        for name, array in arrays.items():
            array = np.ascontiguousarray(array, dtype="<f8")
            encoded = name.encode("utf-8")
            handle.write(struct.pack("<H", len(encoded)))
            handle.write(encoded)
            handle.write(struct.pack("<B", array.ndim))
            handle.write(struct.pack(f"<{array.ndim}I", *array.shape))
            handle.write(array.tobytes())


def load_arrays(path: str | Path) -> dict[str, np.ndarray]:
    with open(path, "rb") as handle:
        blob = handle.read()
    if blob[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic bytes {blob[:4]!r}")
    version = blob[4]
    if version != VERSION:
        raise FormatError(f"{path}: unsupported model version {version}")
    (count,) = struct.unpack_from("<I", blob, 5)
    offset = 9
    arrays: dict[str, np.ndarray] = {}
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", blob, offset)
            offset += 2
            name = blob[offset:offset + name_len].decode("utf-8")
            offset += name_len
            ndim = blob[offset]
            offset += 1
            shape = struct.unpack_from(f"<{ndim}I", blob, offset)
            offset += 4 * ndim
            size = int(np.prod(shape)) if ndim else 1
            array = np.frombuffer(blob, dtype="<f8", count=size, offset=offset)
            offset += 8 * size
            arrays[name] = array.reshape(shape).astype(np.float64)
    except (struct.error, ValueError) as exc:
        raise FormatError(f"{path}: truncated or corrupt model file: {exc}") from None
    if offset != len(blob):
        raise FormatError(f"{path}: trailing bytes after parameter table")
    return arrays
