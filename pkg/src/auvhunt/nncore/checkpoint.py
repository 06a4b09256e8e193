"""Parameter checkpoint container.

Little-endian named-array table: magic, version, entry count, then per
entry a name, dtype tag, shape and raw data, with one trailing CRC-32
over the whole preceding byte stream.  Arrays are float32 except for the
integer bookkeeping entries (step counters), which carry their own tag.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..binio import (
    CHECKPOINT_MAGIC,
    FormatError,
    IntegrityError,
    Reader,
    VersionError,
    crc32,
)

__all__ = ["save_arrays", "load_arrays"]

_VERSION = 1
_DTYPE_TAGS = {np.dtype("<f4"): 0, np.dtype("<u4"): 1, np.dtype("<u8"): 2}
_TAG_DTYPES = {v: k for k, v in _DTYPE_TAGS.items()}


def save_arrays(path: str | Path, arrays: dict[str, np.ndarray]) -> None:
    """Write named arrays in sorted-name order (bit-exact round trip)."""
    chunks = [struct.pack("<III", CHECKPOINT_MAGIC, _VERSION, len(arrays))]
    for name in sorted(arrays):
        arr = np.asarray(arrays[name])
        if arr.dtype == np.float64 or arr.dtype == np.float32:
            arr = arr.astype("<f4")
        elif arr.dtype == np.uint64 or arr.dtype == np.int64:
            arr = arr.astype("<u8")
        elif arr.dtype == np.uint32 or arr.dtype == np.int32:
            arr = arr.astype("<u4")
        tag = _DTYPE_TAGS.get(arr.dtype)
        if tag is None:
            raise ValueError(f"unsupported dtype {arr.dtype} for entry {name!r}")
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<BB", tag, arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape) if arr.ndim else b"")
        chunks.append(np.ascontiguousarray(arr).tobytes())
    body = b"".join(chunks)
    Path(path).write_bytes(body + struct.pack("<I", crc32(body)))


def load_arrays(path: str | Path) -> dict[str, np.ndarray]:
    """Read a checkpoint, verifying magic, version and the trailing CRC."""
    raw = Path(path).read_bytes()
    reader = Reader(raw, name=str(path))
    magic = reader.u32()
    if magic != CHECKPOINT_MAGIC:
        raise FormatError(f"bad checkpoint magic 0x{magic:08X} (expected 0x{CHECKPOINT_MAGIC:08X})")
    version = reader.u32()
    if version != _VERSION:
        raise VersionError(f"checkpoint version {version} unsupported (expected {_VERSION})")
    count = reader.u32()
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        name = reader.take(reader.u16()).decode("utf-8")
        tag, ndim = struct.unpack("<BB", reader.take(2))
        dtype = _TAG_DTYPES.get(tag)
        if dtype is None:
            raise FormatError(f"entry {name!r}: unknown dtype tag {tag}")
        shape = tuple(reader.u32() for _ in range(ndim))
        n = int(np.prod(shape, dtype=np.int64)) if shape else 1
        data = np.frombuffer(reader.take(n * dtype.itemsize), dtype=dtype).copy()
        out[name] = data.reshape(shape)
    stored = reader.u32()
    if reader.remaining() != 0:
        raise FormatError(f"{path}: {reader.remaining()} trailing bytes after CRC")
    actual = crc32(raw[:-4])
    if stored != actual:
        raise IntegrityError(f"{path}: checkpoint CRC-32 mismatch")
    return out
