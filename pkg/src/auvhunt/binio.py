"""Shared binary container plumbing: framing, CRC-32 checks, typed errors.

Both the dataset episode file and the parameter checkpoint file are
little-endian blocks with magic numbers and trailing CRC-32 words; this
module holds the low-level read/write helpers and the error taxonomy they
share.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

__all__ = [
    "DataFormatError",
    "FormatError",
    "VersionError",
    "IntegrityError",
    "TruncatedFileError",
    "Reader",
    "crc32",
    "DATASET_MAGIC",
    "CHECKPOINT_MAGIC",
]

DATASET_MAGIC = 0x414D4450
CHECKPOINT_MAGIC = 0x414D5750


class DataFormatError(Exception):
    """Base class for on-disk format problems."""


class FormatError(DataFormatError):
    """Bad magic bytes or malformed structure."""


class VersionError(DataFormatError):
    """Schema version not supported by this code."""


class IntegrityError(DataFormatError):
    """A checksum did not match; the message names the failing block."""


class TruncatedFileError(DataFormatError):
    """The file ended before a complete block could be read."""


def crc32(data: bytes) -> int:
    return zlib.crc32(data) & 0xFFFFFFFF


class Reader:
    """Cursor over bytes with truncation-aware primitives."""

    def __init__(self, data: bytes, name: str = "file"):
        self.data = data
        self.pos = 0
        self.name = name

    def remaining(self) -> int:
        return len(self.data) - self.pos

    def take(self, n: int) -> bytes:
        if self.remaining() < n:
            raise TruncatedFileError(
                f"{self.name}: needed {n} bytes at offset {self.pos}, "
                f"only {self.remaining()} left"
            )
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def f32_array(self, count: int) -> np.ndarray:
        raw = self.take(4 * count)
        return np.frombuffer(raw, dtype="<f4").copy()
